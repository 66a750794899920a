"""Behaviour of the generators and of ``I(h)`` as the orbit approaches the loop.

Everything here is written in the variable ``u = 2h - c d^2``, which tends to
``0^-`` at the heteroclinic loop.  Each generator splits into an analytic power
series in ``u`` plus a single non-analytic term:

==========  ===============================
``C00+``    ``eta0 * u ln|u|``
``C00-``    ``sigma0 * |u|^{3/4}``
``C10-``    ``sigma1 * |u| ln|u|``
``C20-``    ``sigma2 * |u|^{5/4}``
==========  ===============================

Fits and coefficient maps use a ``|u|``-canonical basis
(``|u|^i ln|u|``, ``|u|^i``, ``|u|^{i+1/4}``, ``|u|^{i+3/4}``); signs coming
from odd powers of ``u`` are absorbed into the coefficients.  Note that
``eta0`` is kept in the ``u ln|u|`` convention (so ``eta0 = -1/4``) while
``sigma1`` is stored as the ``|u| ln|u|`` coefficient.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import binom

from .errors import IllConditioned
from .melnikov import BasisCoeffs
from .model import SystemParams

__all__ = [
    "binomial_half",
    "ExpansionConstants",
    "ExpansionFit",
    "expansion_constants",
    "fit_basis_labels",
    "asymptotic_fit",
    "loop_samples",
    "generator_series",
    "basis_expansion",
]

_COND_LIMIT = 1e12


def _double_factorial(m: int) -> int:
    return math.prod(range(m, 0, -2)) if m > 0 else 1


def binomial_half(k: int) -> float:
    """Coefficient ``d_k`` of ``x^k`` in ``(1 + x)^{1/2}``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return 1.0
    if k == 1:
        return 0.5
    return float(Fraction((-1) ** (k - 1) * _double_factorial(2 * k - 3), _double_factorial(2 * k)))


_TAIL_STRETCH = 64


def _tail(term, K: int) -> float:
    """Tail ``sum_{k>K} term(k, d_k)`` of a series decaying like ``k^{-5/2}``.

    Terms out to ``64 K`` are summed with ``d_k`` from its ratio recurrence;
    the remainder comes from the integral of the leading power law.
    """
    ks = np.arange(K + 1, _TAIL_STRETCH * K + 1, dtype=float)
    ratios = (0.5 - (ks - 1.0)) / ks
    dk = binomial_half(K) * np.cumprod(ratios)
    t = term(ks, dk)
    far = abs(t[-1]) * ks[-1] ** 2.5 * (2.0 / 3.0) * (ks[-1] + 0.5) ** -1.5
    return float(np.sum(t)) + math.copysign(far, t[-1])


@dataclass(frozen=True)
class ExpansionConstants:
    """Series data for the near-loop expansions of the four generators.

    ``sigma_ik[i, k]`` are the analytic-part coefficients of ``C_i0^-`` in
    powers of ``u``; ``eta_k`` those of ``C00+``.  ``tails`` holds the
    appended tail estimates of the slowly converging constant series.
    """

    K: int
    d_k: np.ndarray
    eta0: float
    eta_k: np.ndarray
    sigma0: float
    sigma1: float
    sigma2: float
    sigma_ik: np.ndarray
    tails: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"K": self.K, "eta0": self.eta0, "sigma0": self.sigma0, "sigma1": self.sigma1,
                "sigma2": self.sigma2, "eta_k": [float(v) for v in self.eta_k[:8]],
                "sigma_ik": [[float(v) for v in row[:8]] for row in self.sigma_ik],
                "tails": dict(self.tails)}


def expansion_constants(P: SystemParams, K: int = 200) -> ExpansionConstants:
    if K < 8:
        raise ValueError("series truncation K must be >= 8")
    dk = np.array([binomial_half(k) for k in range(K + 1)])
    ks = np.arange(K + 1)
    sign = (-1.0) ** ks
    T = math.sqrt(P.c) * P.d
    beta = P.beta                     # negative
    not1 = ks != 1

    eta0 = -0.5 * dk[1]
    eta_k = np.zeros(K + 1)
    eta_k[not1] = dk[not1] / (2.0 - 2.0 * ks[not1]) * P.c ** (1.0 - ks[not1]) * P.d ** (2.0 - 2.0 * ks[not1])
    half_terms = sign[not1] * dk[not1] / (2.0 - 2.0 * ks[not1])
    t_half = _tail(lambda k, d: (-1.0) ** k * d / (2.0 - 2.0 * k), K)
    s_half = float(np.sum(half_terms)) + t_half
    eta_k[1] = dk[1] * math.log(T) + s_half

    sig = {}
    tails = {"eta_01": t_half}
    for i in (0, 2):
        terms = (-1.0) ** (ks + 1) * dk / (i + 3.0 - 4.0 * ks)
        tail = _tail(lambda k, d, i=i: (-1.0) ** (k + 1) * d / (i + 3.0 - 4.0 * k), K)
        sig[i] = float(np.sum(terms)) + tail
        tails[f"sigma{i}"] = tail
    sigma_ik = np.zeros((3, K + 1))
    for i in (0, 2):
        sigma_ik[i] = dk / (4.0 * ks - i - 3.0) * beta ** (i + 3 - 4 * ks).astype(float)
    sigma_ik[1, not1] = dk[not1] / (4.0 * ks[not1] - 4.0) * beta ** (4 - 4 * ks[not1]).astype(float)
    sigma_ik[1, 1] = -0.5 * s_half - dk[1] * math.log(abs(beta))
    # C10- carries +d1/4 * u ln|u| = -d1/4 * |u| ln|u|
    sigma1 = -0.25 * dk[1]
    return ExpansionConstants(K, dk, eta0, eta_k, sig[0], sigma1, sig[2], sigma_ik, tails)


def generator_series(consts: ExpansionConstants, name: str, u) -> np.ndarray:
    """Evaluate a generator from its near-loop expansion (``u < 0``).

    ``name`` is one of ``"G0p", "G0m", "G1m", "G2m"``.  Converges for
    ``|u| < c d^2``, slowly as ``|u|`` approaches that radius.
    """
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    if name == "G0p":
        series = np.polynomial.polynomial.polyval(u, consts.eta_k)
        return series + consts.eta0 * u * np.log(au)
    row = {"G0m": 0, "G1m": 1, "G2m": 2}[name]
    series = np.polynomial.polynomial.polyval(u, consts.sigma_ik[row])
    if row == 0:
        return series + consts.sigma0 * au**0.75
    if row == 1:
        return series + consts.sigma1 * au * np.log(au)
    return series + consts.sigma2 * au**1.25


def fit_basis_labels(n: int) -> list[tuple[str, int]]:
    """Column labels ``(family, i)`` of the truncated fit basis for degree ``n``."""
    n1 = (n + 1) // 2
    n2 = (n - 1) // 2
    return ([("c0", i) for i in range(1, n1 + 1)] + [("c1", i) for i in range(0, n1 + 1)]
            + [("c2", i) for i in range(1, n2 + 1)] + [("c3", i) for i in range(0, n2 + 1)])


def _column(label: tuple[str, int], au: np.ndarray) -> np.ndarray:
    fam, i = label
    if fam == "c0":
        return au**i * np.log(au)
    if fam == "c1":
        return au**i
    if fam == "c2":
        return au ** (i + 0.25)
    return au ** (i + 0.75)


_FIRST = {"c0": 1, "c1": 0, "c2": 1, "c3": 0}


@dataclass
class ExpansionFit:
    """Coefficients of ``|u|^i ln|u|`` (``c0``), ``|u|^i`` (``c1``),
    ``|u|^{i+1/4}`` (``c2``) and ``|u|^{i+3/4}`` (``c3``).

    ``c0`` and ``c2`` start at ``i = 1``, ``c1`` and ``c3`` at ``i = 0``; use
    :meth:`coef` to index by ``i``.
    """

    n: int
    c0: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    c3: np.ndarray
    residual: float = 0.0

    @classmethod
    def zero(cls, n: int) -> "ExpansionFit":
        n1, n2 = (n + 1) // 2, (n - 1) // 2
        return cls(n, np.zeros(n1), np.zeros(n1 + 1), np.zeros(n2), np.zeros(n2 + 1), 0.0)

    def coef(self, family: str, i: int) -> float:
        arr = getattr(self, family)
        j = i - _FIRST[family]
        if not 0 <= j < len(arr):
            raise IndexError(f"{family}[{i}] not in the degree-{self.n} basis")
        return float(arr[j])

    def set_coef(self, family: str, i: int, value: float) -> None:
        getattr(self, family)[i - _FIRST[family]] = value

    def vector(self) -> np.ndarray:
        return np.array([self.coef(f, i) for f, i in fit_basis_labels(self.n)])

    def evaluate(self, u) -> np.ndarray:
        au = np.abs(np.asarray(u, dtype=float))
        out = np.zeros_like(au)
        for lab, v in zip(fit_basis_labels(self.n), self.vector()):
            out = out + v * _column(lab, au)
        return out

    def to_dict(self) -> dict:
        return {"n": self.n, "c0": [float(v) for v in self.c0], "c1": [float(v) for v in self.c1],
                "c2": [float(v) for v in self.c2], "c3": [float(v) for v in self.c3],
                "residual": float(self.residual)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "ExpansionFit":
        return cls(int(obj["n"]), *(np.asarray(obj[k], dtype=float) for k in ("c0", "c1", "c2", "c3")),
                   float(obj.get("residual", 0.0)))


def loop_samples(P: SystemParams, func, count: int = 40, lo: float = 1e-6, hi: float = 1e-1):
    """``count`` pairs ``(u, func(h))`` with ``|u| / rho`` log-spaced in ``[lo, hi]``."""
    au = P.rho * np.logspace(math.log10(lo), math.log10(hi), count)
    out = []
    for a in au:
        h = P.rho - 0.5 * a
        out.append((-a, func(h)))
    return out


def asymptotic_fit(samples, n: int, rho: float | None = None, weights: str = "inverse") -> ExpansionFit:
    """Weighted least-squares fit of ``(u, value)`` samples on the truncated basis.

    With ``weights="inverse"`` each row is weighted by ``1/|value|`` (clamped
    away from zero) so that the small-``|u|`` samples are not swamped.

    Raises
    ------
    IllConditioned
        if the squared condition number of the column-equilibrated weighted
        design matrix exceeds 1e12.
    """
    labels = fit_basis_labels(n)
    u = np.array([s[0] for s in samples], dtype=float)
    v = np.array([s[1] for s in samples], dtype=float)
    if u.size < 2 * len(labels):
        raise ValueError(f"need at least {2 * len(labels)} samples for {len(labels)} basis functions")
    if np.any(u >= 0):
        raise ValueError("samples must satisfy u < 0")
    if rho is not None and np.any(u <= -0.1 * rho - 1e-15 * rho):
        raise ValueError("samples must lie in (-0.1 rho, 0)")
    fit = ExpansionFit.zero(n)
    if not np.any(v):
        return fit
    au = -u
    A = np.column_stack([_column(lab, au) for lab in labels])
    if weights == "inverse":
        floor = 1e-8 * np.max(np.abs(v))
        w = 1.0 / np.maximum(np.abs(v), floor)
    else:
        w = np.ones_like(v)
    Aw = A * w[:, None]
    scale = np.linalg.norm(Aw, axis=0)
    As = Aw / scale
    sv = np.linalg.svd(As, compute_uv=False)
    cond2 = (sv[0] / sv[-1]) ** 2 if sv[-1] > 0 else math.inf
    if cond2 > _COND_LIMIT:
        raise IllConditioned(f"normal-equation condition number {cond2:.3g} exceeds {_COND_LIMIT:.0e}; "
                             "widen the sample spread or lower n")
    coef, *_ = np.linalg.lstsq(As, v * w, rcond=None)
    coef = coef / scale
    for lab, c in zip(labels, coef):
        fit.set_coef(lab[0], lab[1], float(c))
    fit.residual = float(np.max(np.abs(A @ coef - v)))
    return fit


def _half_power_series(rho2: float, k: int, order: int) -> np.ndarray:
    """Taylor coefficients in ``u`` of ``(2h)^{k+1/2} = (rho2 + u)^{k+1/2}``."""
    m = np.arange(order + 1)
    return rho2 ** (k + 0.5) * binom(k + 0.5, m) * rho2 ** (-m.astype(float))


def basis_expansion(P: SystemParams, B: BasisCoeffs, consts: ExpansionConstants | None = None,
                    order: int | None = None) -> ExpansionFit:
    """Exact near-loop expansion coefficients of ``basis_melnikov(P, B, .)``.

    Singular coefficients follow directly from the generator expansions;
    the ``c1`` (analytic) coefficients are the Taylor coefficients of the
    combined analytic parts, reported up to ``|u|^{(n+1)//2}``.
    """
    n = B.n
    consts = consts or expansion_constants(P)
    order = (n + 1) // 2 if order is None else order
    fit = ExpansionFit.zero(n)
    rho2 = 2.0 * P.rho
    analytic = np.zeros(order + 1)
    for k, A in enumerate(B.A0):
        analytic += A * _half_power_series(rho2, k, order)
    gens = [(B.A1, consts.eta_k), (B.A2, consts.sigma_ik[0]), (B.A3, consts.sigma_ik[1]),
            (B.A4, consts.sigma_ik[2])]
    for fam, series in gens:
        for k, A in enumerate(fam):
            if k <= order:
                analytic[k:] += A * series[:order + 1 - k]
    # u^j = (-1)^j |u|^j
    fit.c1[:] = ((-1.0) ** np.arange(order + 1) * analytic)[:len(fit.c1)]
    for k, A in enumerate(B.A1):
        # A u^k eta0 u ln|u| = (-1)^{k+1} eta0 A |u|^{k+1} ln|u|
        fit.c0[k] += (-1.0) ** (k + 1) * consts.eta0 * A
    for k, A in enumerate(B.A3):
        # sigma1 is already the |u| ln|u| coefficient of C10-
        fit.c0[k] += (-1.0) ** k * consts.sigma1 * A
    for k, A in enumerate(B.A2):
        fit.c3[k] = (-1.0) ** k * consts.sigma0 * A
    for k, A in enumerate(B.A4):
        fit.c2[k] = (-1.0) ** k * consts.sigma2 * A
    return fit
