import json

import numpy as np
import pytest

from hetloop.cycles import (RootSet, basis_dimension, cascade_design, coeffs_from_basis,
                            energy_grid, isolate_zeros, melnikov_dimension, melnikov_evaluator,
                            one_zero_design, target_zero_count)
from hetloop.melnikov import BasisCoeffs, PerturbationCoeffs, basis_melnikov, direct_melnikov, reduce_to_basis
from hetloop.model import CANONICAL

RHO = CANONICAL.rho
H_HI = RHO * (1 - 1e-8)


@pytest.fixture(scope="module")
def designs():
    return {n: cascade_design(CANONICAL, n) for n in (1, 2)}


def test_target_counts():
    assert [target_zero_count(n) for n in (1, 2, 3, 4)] == [5, 5, 9, 9]


def test_dimension_counts():
    assert [basis_dimension(n) for n in (1, 2, 3, 4)] == [3, 5, 8, 10]
    # the u^k C10- family repeats u^k C00+ on the loop
    assert [melnikov_dimension(n) for n in (1, 2, 3, 4)] == [3, 4, 7, 8]


def test_energy_grid_shape():
    g = energy_grid(CANONICAL, 0.05, H_HI, 100)
    assert np.all(np.diff(g) > 0)
    assert g[0] == pytest.approx(0.05) and RHO - g[-1] == pytest.approx(1e-8 * RHO)
    with pytest.raises(ValueError):
        energy_grid(CANONICAL, 0.05, 0.4, 15)
    with pytest.raises(ValueError):
        energy_grid(CANONICAL, 0.4, 0.05, 100)


def test_zero_coeffs_are_degenerate():
    rs = isolate_zeros(CANONICAL, PerturbationCoeffs.zero(2), 0.01, H_HI)
    assert rs.degenerate and len(rs) == 0


def test_positive_melnikov_has_no_roots():
    rs = isolate_zeros(CANONICAL, PerturbationCoeffs(1, a_plus={(0, 0): 1.0}), 0.01, H_HI)
    assert not rs.degenerate and len(rs) == 0


def test_one_zero_design():
    C = one_zero_design(CANONICAL, 0.25)
    assert direct_melnikov(CANONICAL, C, 0.25) == pytest.approx(0.0, abs=1e-12)
    rs = isolate_zeros(CANONICAL, C, 0.01, H_HI)
    assert len(rs) == 1 and rs.roots[0].simple
    assert rs.roots[0].h == pytest.approx(0.25, abs=1e-11)


def test_general_coeffs_use_arc_integrals():
    C = PerturbationCoeffs(2, a_plus={(1, 0): 1.0, (0, 0): -0.3})
    f = melnikov_evaluator(CANONICAL, C)
    v, err = f(0.3)
    assert v == pytest.approx(direct_melnikov(CANONICAL, C, 0.3), abs=1e-10)
    assert err > 0


def test_coeffs_from_basis_inverts_reduction():
    rng = np.random.default_rng(3)
    for n in (1, 2, 3, 4):
        B = BasisCoeffs.from_vector(n, rng.normal(size=basis_dimension(n)))
        Bb = reduce_to_basis(CANONICAL, coeffs_from_basis(CANONICAL, B))
        np.testing.assert_allclose(Bb.vector(), B.vector(), rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2])
def test_cascade_reaches_space_dimension(designs, n):
    d = designs[n]
    assert d.target_zero_count == 5
    assert d.achievable_zero_count == melnikov_dimension(n) - 1
    assert d.roots.simple_count == d.achievable_zero_count
    assert d.shortfall == 5 - d.achievable_zero_count
    assert any("dimension" in s for s in d.notes())


@pytest.mark.parametrize("n", [1, 2])
def test_cascade_roots_are_simple_alternating_sorted(designs, n):
    roots = designs[n].roots.roots
    h = np.array([r.h for r in roots])
    slopes = np.array([r.slope for r in roots])
    assert np.all(np.diff(h) > 0)
    assert np.all(slopes != 0) and all(r.simple for r in roots)
    assert np.all(np.sign(slopes[1:]) == -np.sign(slopes[:-1]))


@pytest.mark.parametrize("n", [1, 2])
def test_cascade_roots_at_planned_energies(designs, n):
    d = designs[n]
    dist = RHO - np.sort(d.roots.h)
    planned = RHO - np.sort(d.planned_h)
    np.testing.assert_allclose(dist, planned, rtol=1e-3)


@pytest.mark.parametrize("n", [1, 2])
def test_bracketing_soundness(designs, n):
    d = designs[n]
    B = reduce_to_basis(CANONICAL, d.coeffs)
    for r in d.roots.roots:
        lo, hi = r.bracket
        assert 0 < hi - lo <= 1e-12 * RHO * 1.01
        flo, fhi = basis_melnikov(CANONICAL, B, lo), basis_melnikov(CANONICAL, B, hi)
        assert flo * fhi < 0


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_scale_equivariance(designs, lam):
    d = designs[2]
    base = d.roots.h
    rs = isolate_zeros(CANONICAL, d.coeffs.scaled(lam), 0.05 * RHO, H_HI, 240)
    np.testing.assert_allclose(rs.h, base, atol=1e-10)
    B, Bl = reduce_to_basis(CANONICAL, d.coeffs), reduce_to_basis(CANONICAL, d.coeffs.scaled(lam))
    for h in (0.1, 0.3, 0.49):
        assert basis_melnikov(CANONICAL, Bl, h) == pytest.approx(lam * basis_melnikov(CANONICAL, B, h), rel=1e-12)


@pytest.mark.parametrize("n", [1, 2])
def test_grid_refinement_never_loses_roots(designs, n):
    C = designs[n].coeffs
    counts = [len(isolate_zeros(CANONICAL, C, 0.05 * RHO, H_HI, g)) for g in (120, 240, 480)]
    assert counts == sorted(counts)


def test_concurrent_scan_matches_sequential(designs):
    C = designs[2].coeffs
    a = isolate_zeros(CANONICAL, C, 0.05 * RHO, H_HI, 240)
    b = isolate_zeros(CANONICAL, C, 0.05 * RHO, H_HI, 240, workers=4)
    assert a.to_json() == b.to_json()


def test_design_is_deterministic_and_normalized(designs):
    again = cascade_design(CANONICAL, 1)
    assert again.to_json() == designs[1].to_json()
    vals = [abs(v) for side in ("plus", "minus") for m in designs[1].coeffs.to_dict()[side].values() for v in m.values()]
    assert max(vals) == pytest.approx(1.0)


def test_cascade_relaxes_and_reports():
    d = cascade_design(CANONICAL, 3)
    assert d.relaxations and d.ratio > d.requested_ratio
    assert all("->" in s for s in d.notes()[:len(d.relaxations)])
    assert d.roots.simple_count == melnikov_dimension(3) - 1


def test_cascade_preconditions():
    with pytest.raises(ValueError):
        cascade_design(CANONICAL, 0)
    with pytest.raises(ValueError):
        cascade_design(CANONICAL, 1, ratio=0.5)


def test_rootset_json(designs):
    rs = designs[1].roots
    obj = json.loads(rs.to_json())
    assert set(obj) == {"degenerate", "roots"}
    assert set(obj["roots"][0]) == {"h", "slope", "simple"}
    back = RootSet.from_dict(obj)
    np.testing.assert_array_equal(back.h, rs.h)
    assert back.degenerate is False


@pytest.mark.parametrize("n", [1, 2, 3])
def test_general_coefficients_span_melnikov_dimension(n):
    # independent of the basis reduction: arc quadrature of fully general perturbations
    rng = np.random.default_rng(n)
    hs = RHO * (1 - np.geomspace(0.95, 1e-4, 40))
    rows = []
    for _ in range(3 * basis_dimension(n)):
        maps = [{(i, j): float(rng.normal()) for i in range(n + 1) for j in range(n + 1 - i)} for _ in range(4)]
        C = PerturbationCoeffs(n, *maps)
        rows.append([direct_melnikov(CANONICAL, C, h) for h in hs])
    s = np.linalg.svd(np.array(rows), compute_uv=False)
    s = s / s[0]
    k = melnikov_dimension(n)
    assert s[k - 1] > 1e-8 and s[k] < 1e-13
