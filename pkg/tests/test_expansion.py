import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetloop.errors import IllConditioned
from hetloop.expansion import (ExpansionFit, asymptotic_fit, basis_expansion, binomial_half,
                               expansion_constants, fit_basis_labels, generator_series, loop_samples)
from hetloop.melnikov import MINUS, PLUS, BasisCoeffs, basis_melnikov, c_integral
from hetloop.model import CANONICAL, validate_params
from conftest import ETA01_CANONICAL, SIGMA0, SIGMA2


@pytest.fixture(scope="module")
def consts():
    return expansion_constants(CANONICAL)


def test_binomial_half_examples():
    assert binomial_half(0) == 1.0
    assert binomial_half(1) == 0.5
    assert binomial_half(2) == -1 / 8
    assert binomial_half(3) == 1 / 16
    with pytest.raises(ValueError):
        binomial_half(-1)


def test_binomial_half_matches_series_coefficients():
    from scipy.special import binom
    for k in range(30):
        assert binomial_half(k) == pytest.approx(binom(0.5, k), rel=1e-12)


@given(st.floats(-0.9, 0.9), st.integers(8, 60))
def test_series_consistency(x, K):
    partial = sum(binomial_half(k) * x**k for k in range(K + 1))
    assert abs(partial - math.sqrt(1 + x)) <= 2 * abs(binomial_half(K + 1)) + 1e-15


def test_constants(consts):
    assert consts.eta0 == -0.25
    assert abs(consts.sigma1) == 0.125
    assert consts.sigma0 == pytest.approx(-0.87, abs=0.01)
    assert consts.sigma0 == pytest.approx(SIGMA0, abs=1e-10)
    assert consts.sigma2 == pytest.approx(SIGMA2, abs=1e-10)
    assert consts.eta_k[1] == pytest.approx(ETA01_CANONICAL, abs=1e-10)
    assert consts.eta0 < 0 and consts.sigma0 < 0 and consts.sigma2 > 0
    d = consts.d_k
    assert d[0] == 1 and d[1] == 0.5
    assert np.all(np.sign(d[2:]) == (-1.0) ** (np.arange(2, d.size) - 1))


def test_constants_need_enough_terms():
    with pytest.raises(ValueError):
        expansion_constants(CANONICAL, 7)


def test_truncation_converges():
    a = expansion_constants(CANONICAL, 50)
    b = expansion_constants(CANONICAL, 400)
    assert abs(a.sigma0 - b.sigma0) < 1e-9 and abs(a.sigma2 - b.sigma2) < 1e-9


@pytest.mark.parametrize(("name", "side", "i"), [("G0p", PLUS, 0), ("G0m", MINUS, 0), ("G1m", MINUS, 1), ("G2m", MINUS, 2)])
@pytest.mark.parametrize("params", [CANONICAL, validate_params(3.0, -0.8, 1.7, math.sqrt(3.0 * 0.8**4 / 3.4))])
def test_series_reproduce_quadrature(name, side, i, params):
    consts = expansion_constants(params)
    for frac in (1e-6, 1e-3, 1e-2, 0.1):
        au = 2 * params.rho * frac
        h = params.rho - 0.5 * au
        exact = c_integral(params, side, i, 0, h)
        assert float(generator_series(consts, name, -au)) == pytest.approx(exact, abs=2e-9)


def test_fit_zero_function():
    S = [(-u, 0.0) for u in np.geomspace(1e-7, 0.05, 40)]
    fit = asymptotic_fit(S, 2)
    assert fit.residual == 0.0 and not fit.vector().any()


def test_fit_lengths_and_accessor():
    for n in range(1, 7):
        fit = ExpansionFit.zero(n)
        assert len(fit.c0) == (n + 1) // 2 and len(fit.c1) == (n + 1) // 2 + 1
        assert len(fit.c2) == (n - 1) // 2 and len(fit.c3) == (n - 1) // 2 + 1
        assert len(fit_basis_labels(n)) == fit.vector().size
    fit = ExpansionFit.zero(3)
    fit.set_coef("c2", 1, 4.0)
    assert fit.c2[0] == 4.0 and fit.coef("c2", 1) == 4.0
    with pytest.raises(IndexError):
        fit.coef("c2", 0)


def test_fit_json_roundtrip():
    fit = ExpansionFit(3, np.array([1.0, 2.0]), np.array([3.0, 4, 5]), np.array([6.0]), np.array([7.0, 8]), 1e-9)
    back = ExpansionFit.from_dict(json.loads(fit.to_json()))
    assert set(fit.to_dict()) == {"n", "c0", "c1", "c2", "c3", "residual"}
    np.testing.assert_array_equal(back.vector(), fit.vector())
    assert back.residual == 1e-9


def test_fit_preconditions():
    S = [(-u, u) for u in np.geomspace(1e-6, 0.04, 5)]
    with pytest.raises(ValueError):
        asymptotic_fit(S, 2)
    S = [(u, u) for u in np.geomspace(1e-6, 0.04, 40)]
    with pytest.raises(ValueError):
        asymptotic_fit(S, 2)
    S = [(-u, u) for u in np.geomspace(1e-6, 0.5, 40)]
    with pytest.raises(ValueError):
        asymptotic_fit(S, 2, rho=0.5)


def test_fit_ill_conditioned():
    S = loop_samples(CANONICAL, lambda h: c_integral(CANONICAL, PLUS, 0, 0, h))
    with pytest.raises(IllConditioned):
        asymptotic_fit(S, 5)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_fit_idempotence(n, seed):
    rng = np.random.default_rng(seed)
    true = ExpansionFit.zero(n)
    vec = rng.uniform(0.5, 2.0, true.vector().size) * rng.choice([-1, 1], true.vector().size)
    for (fam, i), v in zip(fit_basis_labels(n), vec):
        true.set_coef(fam, i, v)
    u = -np.geomspace(1e-6, 0.05, 40)
    fit = asymptotic_fit(list(zip(u, true.evaluate(u))), n)
    np.testing.assert_allclose(fit.vector(), true.vector(), rtol=1e-6)


def test_c00_plus_leading_log(consts):
    S = loop_samples(CANONICAL, lambda h: c_integral(CANONICAL, PLUS, 0, 0, h))
    fit = asymptotic_fit(S, 3, rho=CANONICAL.rho)
    # u ln|u| = -|u| ln|u| for u < 0
    assert -fit.coef("c0", 1) == pytest.approx(consts.eta0, abs=1e-3)
    assert fit.coef("c0", 1) > 0


def test_c00_minus_leading_power(consts):
    S = loop_samples(CANONICAL, lambda h: c_integral(CANONICAL, MINUS, 0, 0, h))
    fit = asymptotic_fit(S, 1, rho=CANONICAL.rho)
    assert fit.coef("c3", 0) == pytest.approx(consts.sigma0, abs=1e-2)


def test_c10_minus_sign_is_measured(consts):
    S = loop_samples(CANONICAL, lambda h: c_integral(CANONICAL, MINUS, 1, 0, h))
    fit = asymptotic_fit(S, 3, rho=CANONICAL.rho)
    assert fit.coef("c0", 1) == pytest.approx(consts.sigma1, abs=1e-3)
    assert fit.coef("c0", 1) < 0


def test_diagonal_coefficient_maps(consts):
    B = BasisCoeffs.zero(3)
    B.A2[:] = [1.0, 0.5]
    B.A4[:] = [0.7]
    fit = asymptotic_fit(loop_samples(CANONICAL, lambda h: basis_melnikov(CANONICAL, B, h)), 3, rho=CANONICAL.rho)
    assert fit.coef("c2", 1) == pytest.approx(consts.sigma2 * B.A4[0], rel=1e-2)
    for i in range(2):
        assert fit.coef("c3", i) == pytest.approx((-1) ** i * consts.sigma0 * B.A2[i], rel=1e-2)


def test_exact_expansion_matches_fit(consts):
    B = BasisCoeffs.zero(3)
    B.A0[:] = [0.3, -0.2]
    B.A1[:] = [1.0, 0.4]
    B.A2[:] = [0.2, -1.0]
    B.A4[:] = [0.6]
    ex = basis_expansion(CANONICAL, B, consts)
    fit = asymptotic_fit(loop_samples(CANONICAL, lambda h: basis_melnikov(CANONICAL, B, h)), 3, rho=CANONICAL.rho)
    for fam, i in [("c1", 0), ("c0", 1), ("c3", 0), ("c2", 1)]:
        assert fit.coef(fam, i) == pytest.approx(ex.coef(fam, i), rel=2e-2, abs=1e-3)
    # on samples, the exact expansion tracks the function to the size of the dropped terms
    for au in (1e-8, 1e-6, 1e-4):
        h = CANONICAL.rho - 0.5 * au
        assert float(ex.evaluate(-au)) == pytest.approx(basis_melnikov(CANONICAL, B, h), abs=10 * au**1.75)


def test_loop_samples_placement():
    S = loop_samples(CANONICAL, lambda h: h)
    u = np.array([s[0] for s in S])
    assert len(S) == 40
    assert np.all(u < 0)
    np.testing.assert_allclose(np.abs(u[[0, -1]]) / CANONICAL.rho, [1e-6, 1e-1])
