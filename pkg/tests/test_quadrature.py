import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetloop.errors import ConvergenceError
from hetloop.quadrature import (GAUSS_WEIGHTS, KRONROD_WEIGHTS, NODES, QuadratureSpec, integrate,
                                integrate_full)
from conftest import C00_PLUS_025

SQRT_LO = QuadratureSpec(singular_lo=True)


def test_rule_tables():
    g, _ = np.polynomial.legendre.leggauss(10)
    np.testing.assert_allclose(np.sort(NODES[GAUSS_WEIGHTS > 0]), np.sort(g), atol=1e-15)
    assert KRONROD_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-14)
    # the 21-point Kronrod rule integrates x^30 exactly
    assert np.dot(KRONROD_WEIGHTS, NODES**30) == pytest.approx(2 / 31, rel=1e-13)


def test_sqrt_endpoint():
    assert integrate(np.sqrt, 0.0, 1.0, SQRT_LO) == pytest.approx(2 / 3, abs=1e-10)


def test_shifted_hyperbola():
    v = integrate(lambda t: np.sqrt(np.maximum(t * t - 0.5, 0.0)), math.sqrt(0.5), 1.0, SQRT_LO)
    assert v == pytest.approx(C00_PLUS_025, abs=1e-10)


def test_constant_is_exact():
    assert integrate(lambda t: np.ones_like(t), 0.0, 1.0) == 1.0


def test_both_flags():
    # sqrt(x (1 - x)) has square-root zeros at both ends; integral pi/8
    spec = QuadratureSpec(singular_lo=True, singular_hi=True)
    assert integrate(lambda x: np.sqrt(np.maximum(x * (1 - x), 0.0)), 0, 1, spec) == pytest.approx(math.pi / 8, abs=1e-12)


def test_empty_interval_and_reversed_limits():
    assert integrate(np.sin, 1.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        integrate(np.sin, 1.0, 0.0)


def test_result_metadata():
    res = integrate_full(np.exp, 0.0, 1.0)
    assert res.value == pytest.approx(math.e - 1, rel=1e-14)
    assert res.error <= 1e-10 * res.value
    assert res.evaluations >= 21 and res.intervals >= 1


def test_convergence_error_reports_best_value():
    spec = QuadratureSpec(rel_tol=1e-15, abs_tol=1e-300, max_depth=2)
    with pytest.raises(ConvergenceError) as info:
        integrate(lambda x: np.abs(x - 1 / 3) ** 0.1, 0.0, 1.0, spec)
    assert math.isfinite(info.value.value) and info.value.error > 0


@pytest.mark.parametrize(("rel", "absolute", "depth"), [(0, 1e-14, 3), (1e-10, -1, 3), (1e-10, 1e-14, 0)])
def test_spec_validation(rel, absolute, depth):
    with pytest.raises(ValueError):
        QuadratureSpec(rel, absolute, depth)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6), st.lists(st.floats(-3, 3), min_size=1, max_size=6),
       st.floats(-2, 2), st.floats(-2, 2))
def test_linearity(pc, qc, alpha, beta):
    f = np.polynomial.Polynomial(pc)
    g = np.polynomial.Polynomial(qc)
    lhs = integrate(lambda x: alpha * f(x) + beta * g(x), -1.0, 2.0)
    rhs = alpha * integrate(f, -1.0, 2.0) + beta * integrate(g, -1.0, 2.0)
    scale = integrate(lambda x: abs(alpha * f(x)) + abs(beta * g(x)), -1.0, 2.0)
    assert abs(lhs - rhs) <= 10 * 1e-10 * max(scale, 1e-4)


def _midpoint_after_substitution(fun, t0, t1, n=1_000_000):
    # t = t0 + s^2 removes the square-root zero at t0
    S = math.sqrt(t1 - t0)
    s = (np.arange(n) + 0.5) * (S / n)
    return float(np.sum(2 * s * fun(t0 + s * s)) * (S / n))


@pytest.mark.parametrize("u", [-0.37, -0.05, -0.81])
@pytest.mark.parametrize("i", [0, 1, 2])
def test_against_midpoint_oracle(u, i):
    quad2 = lambda t: t**i * np.sqrt(np.maximum(u + t * t, 0.0))
    quad4 = lambda t: t**i * np.sqrt(np.maximum(u + t**4, 0.0))
    for fun, t0 in ((quad2, math.sqrt(-u)), (quad4, (-u) ** 0.25)):
        v = integrate(fun, t0, 1.0, SQRT_LO)
        assert v == pytest.approx(_midpoint_after_substitution(fun, t0, 1.0), rel=1e-6)
