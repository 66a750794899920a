"""First-order Melnikov function of the perturbed switching system.

Three independent evaluation routes are provided:

* :func:`direct_melnikov` integrates the 1-form ``q dx - p dy`` along the two
  arcs of the orbit, each parameterized smoothly by a hyperbolic angle.
* :func:`generator_integral` and :func:`c_integral` evaluate the Abelian
  generators ``\\int x^i y^{2k+1} dx`` and their reduced ``t``-forms.
* :func:`reduce_to_basis` followed by :func:`basis_melnikov` uses the
  five-family representation built from ``(2h)^{k+1/2}`` and
  ``u^k C_{m0}(h)``, with ``u = 2h - c d^2``.

Arc orientation follows the unperturbed flow (clockwise): the right arc runs
from ``(0, sqrt(2h))`` to ``(0, -sqrt(2h))``, the left arc back again.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import UnsupportedCoeffs
from .model import SystemParams, check_energy
from .quadrature import QuadratureSpec, integrate_full

__all__ = [
    "PerturbationCoeffs",
    "RecursionCoeffs",
    "BasisCoeffs",
    "MINUS",
    "PLUS",
    "melnikov_spec",
    "c_integral",
    "recursion_coeffs",
    "recursion_check",
    "unroll_recursion",
    "generator_integral",
    "arc_integral",
    "melnikov_arcs",
    "direct_melnikov",
    "green_coefficients",
    "reduce_to_basis",
    "basis_melnikov",
    "basis_generators",
    "basis_functions",
    "even_power_contour",
    "orbit_points",
    "reduced_family_keys",
]

MINUS = "minus"
PLUS = "plus"
_SIDES = (MINUS, PLUS)

_NEAR_LOOP = 1e-3


def _side(side: str) -> str:
    if side not in _SIDES:
        raise ValueError(f"side must be 'minus' or 'plus', got {side!r}")
    return side


def _key(k) -> tuple[int, int]:
    if isinstance(k, str):
        i, j = k.split(",")
        return int(i), int(j)
    i, j = k
    return int(i), int(j)


@dataclass(frozen=True)
class PerturbationCoeffs:
    """Coefficients ``a_ij^+-`` of ``p^+-`` and ``b_ij^+-`` of ``q^+-``.

    Each map sends ``(i, j)`` with ``i + j <= n`` to a real number; absent keys
    are zero.
    """

    n: int
    a_plus: dict = field(default_factory=dict)
    b_plus: dict = field(default_factory=dict)
    a_minus: dict = field(default_factory=dict)
    b_minus: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("perturbation degree n must be >= 1")
        object.__setattr__(self, "n", int(self.n))
        for name in ("a_plus", "b_plus", "a_minus", "b_minus"):
            clean = {}
            for k, v in dict(getattr(self, name)).items():
                i, j = _key(k)
                if i < 0 or j < 0 or i + j > self.n:
                    raise ValueError(f"{name}[{i},{j}] outside 0 <= i, j and i + j <= {self.n}")
                if float(v) != 0.0:
                    clean[(i, j)] = float(v)
            object.__setattr__(self, name, clean)

    @classmethod
    def zero(cls, n: int) -> "PerturbationCoeffs":
        return cls(n)

    def maps(self, side: str) -> tuple[dict, dict]:
        """``(a, b)`` coefficient maps of ``p`` and ``q`` on one side."""
        return (self.a_plus, self.b_plus) if _side(side) == PLUS else (self.a_minus, self.b_minus)

    def is_zero(self) -> bool:
        return not (self.a_plus or self.b_plus or self.a_minus or self.b_minus)

    def scaled(self, lam: float) -> "PerturbationCoeffs":
        return PerturbationCoeffs(
            self.n, *({k: lam * v for k, v in m.items()}
                      for m in (self.a_plus, self.b_plus, self.a_minus, self.b_minus)))

    def __add__(self, other: "PerturbationCoeffs") -> "PerturbationCoeffs":
        def merge(m1, m2):
            out = dict(m1)
            for k, v in m2.items():
                out[k] = out.get(k, 0.0) + v
            return out
        return PerturbationCoeffs(max(self.n, other.n),
                                  merge(self.a_plus, other.a_plus), merge(self.b_plus, other.b_plus),
                                  merge(self.a_minus, other.a_minus), merge(self.b_minus, other.b_minus))

    def p(self, side: str, x, y):
        return _poly(self.maps(side)[0], x, y)

    def q(self, side: str, x, y):
        return _poly(self.maps(side)[1], x, y)

    def to_dict(self) -> dict:
        def enc(m):
            return {f"{i},{j}": m[(i, j)] for i, j in sorted(m)}
        return {"n": self.n,
                "plus": {"a": enc(self.a_plus), "b": enc(self.b_plus)},
                "minus": {"a": enc(self.a_minus), "b": enc(self.b_minus)}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "PerturbationCoeffs":
        plus = obj.get("plus", {})
        minus = obj.get("minus", {})
        return cls(int(obj["n"]), plus.get("a", {}), plus.get("b", {}),
                   minus.get("a", {}), minus.get("b", {}))

    @classmethod
    def from_json(cls, text: str) -> "PerturbationCoeffs":
        return cls.from_dict(json.loads(text))


def _poly(coeffs: dict, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    for (i, j), v in coeffs.items():
        out = out + v * x**i * y**j
    return out


def melnikov_spec(P: SystemParams, h: float, base: QuadratureSpec | None = None) -> QuadratureSpec:
    """Quadrature settings for Melnikov evaluation at energy ``h``.

    Near the loop the two arcs cancel strongly, so the relative tolerance is
    tightened to 1e-12 once ``|2h - rho| < 1e-2 rho``.
    """
    base = base or QuadratureSpec(rel_tol=1e-10, abs_tol=1e-15)
    if abs(2.0 * h - P.rho) < 1e-2 * P.rho or P.rho - h < 1e-2 * P.rho:
        return QuadratureSpec(min(base.rel_tol, 1e-12), base.abs_tol, base.max_depth)
    return base


def _flags(P: SystemParams, h: float, moving_lo: bool) -> tuple[bool, bool]:
    """Singular flags: always at the moving turning point, both near the loop."""
    near = abs(P.rho - h) < _NEAR_LOOP * P.rho
    if near:
        return True, True
    return (True, False) if moving_lo else (False, True)


# --------------------------------------------------------------------------
# reduced t-integrals C_ik and their recursion
# --------------------------------------------------------------------------

def _c_full(P: SystemParams, side: str, i: int, k: int, h: float,
            spec: QuadratureSpec | None = None):
    check_energy(P, h)
    if i < 0 or k < 0:
        raise ValueError("c_integral needs i >= 0 and k >= 0")
    w = 2.0 * P.rho - 2.0 * h          # = -u > 0
    spec = spec or QuadratureSpec(rel_tol=1e-12, abs_tol=1e-16)
    e = k + 0.5
    if _side(side) == PLUS:
        s = math.sqrt(w)
        top = math.sqrt(P.c) * P.d
        def f(t):
            return t**i * np.maximum((t - s) * (t + s), 0.0) ** e
        return integrate_full(f, s, top, spec.with_flags(*_flags(P, h, True)))
    r = w ** 0.25
    r2 = math.sqrt(w)
    lo = P.beta
    hi = -r
    def g(t):
        at = np.abs(t)
        return t**i * np.maximum((at - r) * (at + r) * (t * t + r2), 0.0) ** e
    return integrate_full(g, lo, hi, spec.with_flags(*_flags(P, h, False)))


def c_integral(P: SystemParams, side: str, i: int, k: int, h: float,
               spec: QuadratureSpec | None = None) -> float:
    """Reduced integral ``C_ik^+-(h)``.

    ``C_ik^-`` integrates ``t^i (2h + t^4 - a b^4/2)^{k+1/2}`` over
    ``[(a/2)^{1/4} b, -(a b^4/2 - 2h)^{1/4}]``; ``C_ik^+`` integrates
    ``t^i (2h + t^2 - c d^2)^{k+1/2}`` over ``[(c d^2 - 2h)^{1/2}, c^{1/2} d]``.
    """
    return _c_full(P, side, i, k, h, spec).value


@dataclass(frozen=True)
class RecursionCoeffs:
    alpha: float
    beta: float
    gamma: float
    delta: float

    def __iter__(self):
        return iter((self.alpha, self.beta, self.gamma, self.delta))


def recursion_coeffs(P: SystemParams, i: int, k: int) -> RecursionCoeffs:
    """Coefficients of the one-step relations between ``C_ik`` and ``C_{i,k-1}``."""
    if i < 0 or k < 1:
        raise ValueError("recursion coefficients need i >= 0 and k >= 1")
    e = k + 0.5
    m4 = i + 1 + 4 * e
    m2 = i + 1 + 2 * e
    alpha = -(P.a / 2.0) ** ((i + 1) / 4.0) * P.b ** (i + 1) / m4
    gamma = P.c ** ((i + 1) / 2.0) * P.d ** (i + 1) / m2
    return RecursionCoeffs(alpha, 4 * e / m4, gamma, 2 * e / m2)


def recursion_check(P: SystemParams, side: str, i: int, k: int, h: float,
                    spec: QuadratureSpec | None = None) -> float:
    """Relative residual of ``C_ik = g (2h)^{k+1/2} + f u C_{i,k-1}`` by quadrature."""
    rc = recursion_coeffs(P, i, k)
    u = 2.0 * h - 2.0 * P.rho
    lhs = c_integral(P, side, i, k, h, spec)
    prev = c_integral(P, side, i, k - 1, h, spec)
    if side == MINUS:
        rhs = rc.alpha * (2.0 * h) ** (k + 0.5) + rc.beta * u * prev
    else:
        rhs = rc.gamma * (2.0 * h) ** (k + 0.5) + rc.delta * u * prev
    return abs(lhs - rhs) / (1.0 + abs(lhs))


def unroll_recursion(P: SystemParams, side: str, i: int, k: int) -> tuple[np.ndarray, float]:
    """Unrolled recursion for ``C_ik``.

    Returns ``(poly, lead)`` with
    ``C_ik(h) = sqrt(2h) * sum_m poly[m] (2h)^m + lead * u^k C_i0(h)``.
    """
    poly = np.zeros(k + 1)
    lead = 1.0
    # C_ik = sum_j [prod_{l<j} f(k-l)] u^j g(k-j) (2h)^{k-j+1/2} + [prod f] u^k C_i0
    for j in range(k):
        rc = recursion_coeffs(P, i, k - j)
        fac = (rc.alpha if side == MINUS else rc.gamma) * lead
        # u^j (2h)^{k-j} with u = 2h - 2 rho
        for m in range(j + 1):
            poly[k - j + m] += fac * comb(j, m) * (-2.0 * P.rho) ** (j - m)
        lead *= rc.beta if side == MINUS else rc.delta
    return poly, lead


# --------------------------------------------------------------------------
# generator integrals and direct line integrals
# --------------------------------------------------------------------------

def generator_integral(P: SystemParams, side: str, i: int, k: int, h: float,
                       spec: QuadratureSpec | None = None) -> float:
    """``I_{i,2k}(h) = \\int_{L_h} x^i y^{2k+1} dx`` by upper-branch doubling.

    Integrates ``2 x^i (2(h - H(x, 0)))^{k+1/2}`` over ``[x_left, 0]`` or
    ``[0, x_right]`` directly in ``x``.
    """
    check_energy(P, h)
    if i < 0 or k < 0:
        raise ValueError("generator_integral needs i >= 0 and k >= 0")
    spec = spec or QuadratureSpec(rel_tol=1e-12, abs_tol=1e-16)
    w = 2.0 * P.rho - 2.0 * h
    e = k + 0.5
    if _side(side) == PLUS:
        xr = P.d - math.sqrt(w / P.c)
        def f(x):
            return 2.0 * x**i * np.maximum(P.c * (xr - x) * (2 * P.d - xr - x), 0.0) ** e
        lo_flag, hi_flag = _flags(P, h, False)
        return integrate_full(f, 0.0, xr, spec.with_flags(lo_flag, hi_flag)).value
    r = (2.0 * w / P.a) ** 0.25
    xl = P.b + r
    def g(x):
        z = x - P.b
        return 2.0 * x**i * np.maximum(0.5 * P.a * (x - xl) * (z + r) * (z * z + r * r), 0.0) ** e
    return integrate_full(g, xl, 0.0, spec.with_flags(*_flags(P, h, True))).value


def _arc(P: SystemParams, side: str, h: float):
    """Smooth parameterization ``s -> (x, y, x', y')`` of one arc and its range.

    Right arc: ``x = d - sqrt(w/c) cosh s``, ``y = sqrt(w) sinh s`` with ``s``
    running from ``+s0`` down to ``-s0``.  Left arc:
    ``x = b + r sqrt(cosh s)``, ``y = sqrt(w) sinh s`` with ``s`` from ``-s1``
    up to ``+s1``.  Here ``w = 2 rho - 2h``.
    """
    w = 2.0 * P.rho - 2.0 * h
    sw = math.sqrt(w)
    if side == PLUS:
        rc = math.sqrt(w / P.c)
        s0 = math.acosh(P.d / rc)
        def curve(s):
            ch, sh = np.cosh(s), np.sinh(s)
            return P.d - rc * ch, sw * sh, -rc * sh, sw * ch
        return curve, s0, -s0
    r = (2.0 * w / P.a) ** 0.25
    s1 = math.acosh((P.b / r) ** 2)
    def curve(s):
        ch, sh = np.cosh(s), np.sinh(s)
        root = np.sqrt(ch)
        return P.b + r * root, sw * sh, 0.5 * r * sh / root, sw * ch
    return curve, -s1, s1


def orbit_points(P: SystemParams, h: float, num: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Points along the closed orbit ``H = h`` in flow order, starting at ``(0, sqrt(2h))``."""
    check_energy(P, h)
    xs, ys = [], []
    for side in (PLUS, MINUS):
        curve, s_start, s_end = _arc(P, side, h)
        x, y, _, _ = curve(np.linspace(s_start, s_end, num))
        xs.append(x)
        ys.append(y)
    return np.concatenate(xs), np.concatenate(ys)


def arc_integral(P: SystemParams, side: str, h: float, form, spec: QuadratureSpec | None = None):
    """Integral of a 1-form along the oriented arc ``L_h^+-``.

    ``form(x, y)`` returns the pair ``(F, G)`` for ``F dx + G dy``.
    Returns a :class:`~hetloop.quadrature.QuadResult`.
    """
    check_energy(P, h)
    curve, s_start, s_end = _arc(P, _side(side), h)
    spec = spec or melnikov_spec(P, h)

    def integrand(s):
        x, y, dx, dy = curve(s)
        F, G = form(x, y)
        return F * dx + G * dy

    lo, hi = sorted((s_start, s_end))
    res = integrate_full(integrand, lo, hi, spec.with_flags(False, False))
    if s_start > s_end:
        return type(res)(-res.value, res.error, res.intervals, res.evaluations, res.roundoff_limited)
    return res


def melnikov_arcs(P: SystemParams, C: PerturbationCoeffs, h: float,
                  spec: QuadratureSpec | None = None, with_error: bool = False):
    """``(I^-(h), I^+(h))``, optionally followed by the summed error estimate."""
    out = []
    err = 0.0
    for side in _SIDES:
        a, b = C.maps(side)
        if not a and not b:
            out.append(0.0)
            continue
        res = arc_integral(P, side, h, lambda x, y, a=a, b=b: (_poly(b, x, y), -_poly(a, x, y)), spec)
        out.append(res.value)
        err += res.error
    if with_error:
        return out[0], out[1], err
    return out[0], out[1]


def direct_melnikov(P: SystemParams, C: PerturbationCoeffs, h: float,
                    spec: QuadratureSpec | None = None) -> float:
    """``I(h) = \\int_{L_h^-} q^- dx - p^- dy + \\int_{L_h^+} q^+ dx - p^+ dy``."""
    im, ip = melnikov_arcs(P, C, h, spec)
    return im + ip


def even_power_contour(P: SystemParams, side: str, i: int, k: int, h: float) -> float:
    """Closed-contour integral of ``x^i y^{2k+2} dx`` over the arc plus the y-axis chord.

    The chord lies on ``x = 0`` and adds nothing to a ``dx`` form, so this is
    the arc integral alone; it vanishes by the ``y -> -y`` symmetry.
    """
    return arc_integral(P, side, h, lambda x, y: (x**i * y ** (2 * k + 2), 0.0 * x)).value


# --------------------------------------------------------------------------
# Green reduction and the five-family representation
# --------------------------------------------------------------------------

def green_coefficients(C: PerturbationCoeffs, side: str) -> dict:
    """``A_{i,j} = b_{i,j+1} + (i+1)/(j+1) a_{i+1,j}`` for ``i + j <= n - 1``."""
    a, b = C.maps(side)
    out = {}
    for i in range(C.n):
        for j in range(C.n - i):
            v = b.get((i, j + 1), 0.0) + (i + 1) / (j + 1) * a.get((i + 1, j), 0.0)
            if v:
                out[(i, j)] = v
    return out


def reduced_family_keys(n: int) -> list[tuple[str, str, tuple[int, int]]]:
    """Coefficients accepted by :func:`reduce_to_basis`, as ``(side, 'a'|'b', (i, j))``."""
    keys = []
    for k in range(n // 2 + 1):
        keys.append((PLUS, "a", (0, 2 * k)))
    for k in range(n // 2 + 1):
        keys.append((MINUS, "a", (0, 2 * k)))
    for k in range((n - 1) // 2 + 1):
        keys.append((PLUS, "b", (0, 2 * k + 1)))
    for i in range(3):
        for k in range((n - 1 - i) // 2 + 1):
            keys.append((MINUS, "b", (i, 2 * k + 1)))
    return keys


@dataclass
class BasisCoeffs:
    """Free parameters of the representation

    ``I(h) = sum A0[k] (2h)^{k+1/2} + sum u^k (A1[k] C00+ + A2[k] C00- + A3[k] C10- + A4[k] C20-)``

    with ``u = 2h - c d^2``.
    """

    n: int
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    A4: np.ndarray

    @staticmethod
    def lengths(n: int) -> tuple[int, int, int, int, int]:
        return (n // 2 + 1, (n - 1) // 2 + 1, (n - 1) // 2 + 1,
                max((n - 2) // 2 + 1, 0), max((n - 3) // 2 + 1, 0))

    @classmethod
    def zero(cls, n: int) -> "BasisCoeffs":
        return cls(n, *(np.zeros(L) for L in cls.lengths(n)))

    @classmethod
    def from_vector(cls, n: int, vec) -> "BasisCoeffs":
        vec = np.asarray(vec, dtype=float)
        parts = []
        pos = 0
        for L in cls.lengths(n):
            parts.append(vec[pos:pos + L].copy())
            pos += L
        if pos != vec.size:
            raise ValueError(f"expected {pos} basis coefficients, got {vec.size}")
        return cls(n, *parts)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.A0, self.A1, self.A2, self.A3, self.A4])

    def __post_init__(self):
        if any(len(x) != L for x, L in zip(self.families(), self.lengths(self.n))):
            raise ValueError(f"basis sequence lengths do not match n={self.n}")

    def families(self):
        return (self.A0, self.A1, self.A2, self.A3, self.A4)

    def to_dict(self) -> dict:
        return {"n": self.n, **{f"A{l}": [float(v) for v in fam] for l, fam in enumerate(self.families())}}


def reduce_to_basis(P: SystemParams, C: PerturbationCoeffs) -> BasisCoeffs:
    """Map reduced-family perturbation coefficients to the five-family basis.

    Supported coefficients: ``a_{0,2k}^+-``, ``b_{0,2k+1}^+`` and
    ``b_{i,2k+1}^-`` for ``i = 0, 1, 2``.  With everything else zero the Green
    step gives ``A_{i,2k} = b_{i,2k+1}``, no index reduction is needed, and
    the generators map onto the basis through the ``t``-substitutions and the
    unrolled recursion.

    Raises
    ------
    UnsupportedCoeffs
        if any coefficient outside the reduced family is nonzero.
    """
    n = C.n
    allowed = {(s, ab, ij) for s, ab, ij in reduced_family_keys(n)}
    for side in _SIDES:
        for ab, m in zip("ab", C.maps(side)):
            extra = [ij for ij in m if (side, ab, ij) not in allowed]
            if extra:
                raise UnsupportedCoeffs(f"{ab}^{side} coefficients {sorted(extra)} are outside "
                                        "the reduced family")
    B = BasisCoeffs.zero(n)
    for k in range(n // 2 + 1):
        B.A0[k] += 2.0 * (C.a_plus.get((0, 2 * k), 0.0) - C.a_minus.get((0, 2 * k), 0.0)) / (2 * k + 1)

    def add_c(side, m, k, weight):
        # weight * C_mk  ->  sqrt(2h)-polynomial part and u^k C_m0 part
        poly, lead = unroll_recursion(P, side, m, k)
        B.A0[:poly.size] += weight * poly
        fam = B.A1 if side == PLUS else (B.A2, B.A3, B.A4)[m]
        fam[k] += weight * lead

    plus_green = green_coefficients(C, PLUS)
    for (i, j), A in plus_green.items():
        # I_{0,2k}^+ = 2 c^{-1/2} C_0k^+
        add_c(PLUS, 0, j // 2, 2.0 / math.sqrt(P.c) * A)
    minus_green = green_coefficients(C, MINUS)
    s = (2.0 / P.a) ** 0.25
    for (i, j), A in minus_green.items():
        k = j // 2
        # I_{i,2k}^- = 2 (2/a)^{1/4} sum_m binom(i, m) b^{i-m} (-(2/a)^{1/4})^m C_mk^-
        for m in range(i + 1):
            add_c(MINUS, m, k, 2.0 * s * A * comb(i, m) * P.b ** (i - m) * (-s) ** m)
    return B


def basis_generators(P: SystemParams, h: float, spec: QuadratureSpec | None = None) -> dict:
    """``C00+, C00-, C10-, C20-`` at ``h``."""
    return {
        "G0p": c_integral(P, PLUS, 0, 0, h, spec),
        "G0m": c_integral(P, MINUS, 0, 0, h, spec),
        "G1m": c_integral(P, MINUS, 1, 0, h, spec),
        "G2m": c_integral(P, MINUS, 2, 0, h, spec),
    }


def basis_functions(P: SystemParams, n: int, h: float, spec: QuadratureSpec | None = None) -> np.ndarray:
    """Values of every basis function at ``h``, ordered like :meth:`BasisCoeffs.vector`."""
    check_energy(P, h)
    lens = BasisCoeffs.lengths(n)
    g = basis_generators(P, h, spec) if n >= 1 else {}
    u = 2.0 * h - 2.0 * P.rho
    cols = [(2.0 * h) ** (k + 0.5) for k in range(lens[0])]
    for name, L in zip(("G0p", "G0m", "G1m", "G2m"), lens[1:]):
        cols.extend(u**k * g[name] for k in range(L))
    return np.array(cols)


def basis_melnikov(P: SystemParams, B: BasisCoeffs, h: float,
                   spec: QuadratureSpec | None = None) -> float:
    check_energy(P, h)
    vec = B.vector()
    if not vec.any():
        return 0.0
    return float(np.dot(vec, basis_functions(P, B.n, h, spec)))
