"""Zero designs for ``I(h)`` near the loop and isolation of its simple zeros.

The building block is the basis representation of :mod:`hetloop.melnikov`.
Because the loop condition forces ``sqrt(c) d = sqrt(a/2) b^2``, the two
reduced generators ``C10-`` and ``C00+`` are the same integral up to a
factor ``-1/2``, so the ``u^k C10-`` family repeats ``u^k C00+`` and the
Melnikov functions of degree ``n`` span a space of dimension
``melnikov_dimension(n)``.  A nonzero member has at most one zero fewer
than that wherever the span is a Chebyshev system, and exactly that many
zeros can be prescribed by taking a null vector of the generators sampled at
the chosen energies.  :func:`cascade_design` places
those zeros at loop distances in geometric progression, which is the
near-loop cascade pattern, and verifies them with :func:`isolate_zeros`.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DesignFailure, UnsupportedCoeffs
from .expansion import ExpansionFit, basis_expansion
from .melnikov import (MINUS, PLUS, BasisCoeffs, PerturbationCoeffs, basis_functions,
                       basis_melnikov, melnikov_arcs, reduce_to_basis)
from .model import SystemParams, check_energy

__all__ = [
    "Root",
    "RootSet",
    "CascadeDesign",
    "target_zero_count",
    "basis_dimension",
    "melnikov_dimension",
    "melnikov_evaluator",
    "energy_grid",
    "isolate_zeros",
    "coeffs_from_basis",
    "cascade_design",
    "one_zero_design",
]

log = logging.getLogger(__name__)

_LOOP_FLOOR = 1e-8          # smallest scanned rho - h, relative to rho
_BISECT_TOL = 1e-12         # bracket width stop, relative to rho
_DEGENERATE = 1e-14
_BASIS_REL_ERR = 1e-12      # relative accuracy of the generator quadratures


def target_zero_count(n: int) -> int:
    """Zero count ``4 floor((n+1)/2) + 1`` claimed for the near-loop cascade."""
    return 4 * ((n + 1) // 2) + 1


def basis_dimension(n: int) -> int:
    """Number of basis coefficients ``A0..A4`` for degree ``n``."""
    return int(sum(BasisCoeffs.lengths(n)))


def _design_slots(n: int) -> np.ndarray:
    """Positions in ``BasisCoeffs.vector`` of the independent families (all but ``A3``)."""
    L = BasisCoeffs.lengths(n)
    start = sum(L[:3])
    keep = np.ones(sum(L), dtype=bool)
    keep[start:start + L[3]] = False
    return np.flatnonzero(keep)


def melnikov_dimension(n: int) -> int:
    """Dimension of the space of degree-``n`` Melnikov functions."""
    return int(_design_slots(n).size)


@dataclass(frozen=True)
class Root:
    h: float
    slope: float
    bracket: tuple[float, float]
    simple: bool = True


@dataclass
class RootSet:
    roots: list[Root] = field(default_factory=list)
    degenerate: bool = False
    skipped: list[float] = field(default_factory=list)

    @property
    def h(self) -> np.ndarray:
        return np.array([r.h for r in self.roots])

    @property
    def simple_count(self) -> int:
        return sum(r.simple for r in self.roots)

    def __len__(self) -> int:
        return len(self.roots)

    def to_dict(self) -> dict:
        return {"degenerate": self.degenerate,
                "roots": [{"h": r.h, "slope": r.slope, "simple": r.simple} for r in self.roots]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "RootSet":
        roots = [Root(float(r["h"]), float(r["slope"]), (float(r["h"]), float(r["h"])),
                      bool(r.get("simple", True))) for r in obj["roots"]]
        return cls(roots, bool(obj["degenerate"]))


def melnikov_evaluator(P: SystemParams, C: PerturbationCoeffs):
    """Return ``f(h) -> (I(h), error estimate)``.

    Reduced-family coefficients go through the basis representation, which
    is much cheaper; anything else through the arc integrals.
    """
    try:
        B = reduce_to_basis(P, C)
    except UnsupportedCoeffs:
        def direct(h):
            im, ip, err = melnikov_arcs(P, C, h, with_error=True)
            return im + ip, err
        return direct
    vec = B.vector()

    def fast(h):
        terms = vec * basis_functions(P, C.n, h)
        return float(math.fsum(terms)), _BASIS_REL_ERR * float(np.sum(np.abs(terms))) + 1e-300
    return fast


def energy_grid(P: SystemParams, h_lo: float, h_hi: float, size: int) -> np.ndarray:
    """``size`` energies uniform in ``log(rho - h)``, densest toward ``h_hi``."""
    check_energy(P, h_lo)
    check_energy(P, h_hi)
    if not h_lo < h_hi:
        raise ValueError("need h_lo < h_hi")
    if size < 16:
        raise ValueError("grid size must be >= 16")
    far = P.rho - h_lo
    near = max(P.rho - h_hi, _LOOP_FLOOR * P.rho)
    if near >= far:
        raise ValueError("energy window lies entirely inside the loop-distance floor")
    return P.rho - np.geomspace(far, near, size)


def _bisect(f, lo, hi, flo, tol):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fm = f(mid)[0]
        if fm == 0.0:
            return mid, mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return lo, hi


def isolate_zeros(P: SystemParams, C: PerturbationCoeffs, h_lo: float, h_hi: float,
                  grid_size: int = 200, evaluator=None, workers: int = 1) -> RootSet:
    """Bracket and refine every sign change of ``I(h)`` on ``[h_lo, h_hi]``.

    Roots are refined by bisection to a bracket of ``1e-12 rho``.  Slopes come
    from a central difference with step ``min(0.1 (rho - h), width / 4)``
    where ``width`` is the grid bracket that caught the sign change; a root
    counts as simple when ``|slope| >= 1e3 * err / width`` with ``err`` the
    error estimate of ``I`` next to the root.

    Grid samples whose quadrature fails are skipped and logged; they are
    listed in ``RootSet.skipped``.
    """
    f = evaluator or melnikov_evaluator(P, C)
    grid = energy_grid(P, h_lo, h_hi, grid_size)

    def safe(h):
        try:
            return f(h)
        except ConvergenceError as exc:
            log.warning("skipping I(h) sample at h=%r: %s", h, exc)
            return None

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            samples = list(pool.map(safe, grid))
    else:
        samples = [safe(h) for h in grid]
    skipped = [float(h) for h, s in zip(grid, samples) if s is None]
    pts = [(float(h), s[0]) for h, s in zip(grid, samples) if s is not None]
    if not pts or all(abs(v) < _DEGENERATE for _, v in pts):
        return RootSet([], True, skipped)

    tol = _BISECT_TOL * P.rho
    brackets = []
    for (h0, v0), (h1, v1) in zip(pts, pts[1:]):
        if v0 == 0.0:
            brackets.append((h0, h0, h1 - h0))
        elif (v0 > 0) != (v1 > 0) and v1 != 0.0:
            lo, hi = _bisect(f, h0, h1, v0, tol)
            brackets.append((lo, hi, h1 - h0))
    if pts[-1][1] == 0.0:
        brackets.append((pts[-1][0], pts[-1][0], pts[-1][0] - pts[-2][0]))

    roots = []
    for lo, hi, width in brackets:
        h = 0.5 * (lo + hi)
        step = min(0.1 * (P.rho - h), 0.25 * width)
        fp, ep = f(h + step)
        fm, em = f(h - step)
        slope = (fp - fm) / (2.0 * step)
        err = max(ep, em)
        roots.append(Root(h, slope, (lo, hi), abs(slope) * width >= 1e3 * err))
    return RootSet(roots, False, skipped)


def _inversion_keys(n: int) -> list[tuple[str, str, tuple[int, int]]]:
    """One reduced-family coefficient per basis slot, in ``BasisCoeffs.vector`` order."""
    L0, L1, L2, L3, L4 = BasisCoeffs.lengths(n)
    return ([(PLUS, "a", (0, 2 * k)) for k in range(L0)]
            + [(PLUS, "b", (0, 2 * k + 1)) for k in range(L1)]
            + [(MINUS, "b", (0, 2 * k + 1)) for k in range(L2)]
            + [(MINUS, "b", (1, 2 * k + 1)) for k in range(L3)]
            + [(MINUS, "b", (2, 2 * k + 1)) for k in range(L4)])


def _unit(n, side, ab, ij, value=1.0) -> PerturbationCoeffs:
    kw = {"a_plus": {}, "b_plus": {}, "a_minus": {}, "b_minus": {}}
    kw[f"{ab}_{'plus' if side == PLUS else 'minus'}"] = {ij: value}
    return PerturbationCoeffs(n, **kw)


def coeffs_from_basis(P: SystemParams, B: BasisCoeffs) -> PerturbationCoeffs:
    """Reduced-family coefficients whose basis representation is ``B``."""
    n = B.n
    keys = _inversion_keys(n)
    R = np.column_stack([reduce_to_basis(P, _unit(n, *key)).vector() for key in keys])
    x = np.linalg.solve(R, B.vector())
    C = PerturbationCoeffs.zero(n)
    for key, v in zip(keys, x):
        C = C + _unit(n, *key, value=float(v))
    return C


@dataclass
class CascadeDesign:
    """Result of :func:`cascade_design`.

    ``target_zero_count`` is the count ``4 floor((n+1)/2) + 1``;
    ``achievable_zero_count`` is ``melnikov_dimension(n) - 1``, the most the
    design family can produce.  ``ratio`` is the separation actually used
    after any relaxations, which are listed with their reasons.
    """

    n: int
    ratio: float
    coeffs: PerturbationCoeffs
    basis: BasisCoeffs
    target_zero_count: int
    achievable_zero_count: int
    c_targets: ExpansionFit
    planned_h: list[float]
    roots: RootSet
    requested_ratio: float
    relaxations: list[dict] = field(default_factory=list)

    @property
    def shortfall(self) -> int:
        return max(self.target_zero_count - self.roots.simple_count, 0)

    def notes(self) -> list[str]:
        out = [f"ratio relaxed {r['from']:.6g} -> {r['to']:.6g}: {r['reason']}" for r in self.relaxations]
        if self.achievable_zero_count < self.target_zero_count:
            out.append(f"the degree-{self.n} Melnikov space has dimension "
                       f"{self.achievable_zero_count + 1}, so at most "
                       f"{self.achievable_zero_count} zeros can be prescribed "
                       f"against a target of {self.target_zero_count}")
        return out

    def to_dict(self) -> dict:
        return {"n": self.n, "ratio": self.ratio, "requested_ratio": self.requested_ratio,
                "target_zero_count": self.target_zero_count,
                "achievable_zero_count": self.achievable_zero_count,
                "found_zero_count": self.roots.simple_count,
                "coeffs": self.coeffs.to_dict(), "basis": self.basis.to_dict(),
                "c_targets": self.c_targets.to_dict(), "planned_h": list(self.planned_h),
                "roots": self.roots.to_dict(), "relaxations": list(self.relaxations),
                "notes": self.notes()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _null_design(P: SystemParams, n: int, hs: np.ndarray) -> BasisCoeffs:
    slots = _design_slots(n)
    G = np.array([basis_functions(P, n, h)[slots] for h in hs])
    scale = np.linalg.norm(G, axis=0)
    _, _, vt = np.linalg.svd(G / scale)
    vec = np.zeros(basis_dimension(n))
    vec[slots] = vt[-1] / scale
    return BasisCoeffs.from_vector(n, vec)


def _normalized(C: PerturbationCoeffs) -> float:
    vals = [v for side in (PLUS, MINUS) for m in C.maps(side) for v in m.values()]
    big = max(vals, key=abs)
    return 1.0 / big


def cascade_design(P: SystemParams, n: int, ratio: float = 1e-3, outer: float = 0.1,
                   inner_floor: float = 1e-7, max_relax: int = 3, grid_size: int = 240,
                   h_lo: float | None = None) -> CascadeDesign:
    """Coefficients whose ``I(h)`` has ``melnikov_dimension(n) - 1`` simple zeros near the loop.

    Zeros are prescribed at ``rho - h_j = outer * rho * ratio^j``.  If the
    innermost one lies below ``inner_floor * rho``, or the zero scan does not
    recover every prescribed zero as a simple root, the ratio is relaxed to
    ``sqrt(ratio)`` and the design redone, at most ``max_relax`` times; each
    relaxation is recorded.

    Raises
    ------
    DesignFailure
        if the zeros are still not recovered after the last relaxation;
        ``fitted`` carries the last root set.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < ratio <= 0.1:
        raise ValueError("ratio must lie in (0, 0.1]")
    count = melnikov_dimension(n) - 1
    h_lo = 0.5 * outer * P.rho if h_lo is None else h_lo
    h_hi = P.rho * (1.0 - _LOOP_FLOOR)
    current = ratio
    relaxations: list[dict] = []
    last = None
    for attempt in range(max_relax + 1):
        dist = outer * P.rho * current ** np.arange(count)
        reason = None
        if dist[-1] < inner_floor * P.rho:
            reason = (f"innermost prescribed zero at rho-h={dist[-1]:.3g} is below "
                      f"{inner_floor:g} rho")
        else:
            hs = P.rho - dist
            B = _null_design(P, n, hs)
            C = coeffs_from_basis(P, B)
            lam = _normalized(C)
            C = C.scaled(lam)
            B = reduce_to_basis(P, C)
            roots = isolate_zeros(P, C, h_lo, h_hi, grid_size)
            last = roots
            found = np.sort(roots.h)
            ok = roots.simple_count == count and len(roots) == count and np.all(
                np.abs((P.rho - found) / dist - 1.0) < 1e-3)
            if ok:
                return CascadeDesign(n, float(current), C, B, target_zero_count(n), count,
                                     basis_expansion(P, B), [float(h) for h in hs], roots,
                                     float(ratio), relaxations)
            reason = (f"zero scan found {roots.simple_count} simple zeros of {len(roots)} "
                      f"sign changes, expected {count} at the prescribed energies")
        if attempt == max_relax:
            raise DesignFailure(f"cascade for n={n} failed at ratio {current:.3g}: {reason}", last)
        nxt = math.sqrt(current)
        relaxations.append({"from": float(current), "to": float(nxt), "reason": reason})
        log.info("relaxing cascade ratio %.3g -> %.3g: %s", current, nxt, reason)
        current = nxt
    raise AssertionError("unreachable")


def one_zero_design(P: SystemParams, h_star: float, n: int = 1) -> PerturbationCoeffs:
    """``a_00^+ = 1`` plus the ``b_01^+`` that puts a simple zero of ``I`` at ``h_star``."""
    check_energy(P, h_star)
    base = PerturbationCoeffs(n, a_plus={(0, 0): 1.0})
    kick = PerturbationCoeffs(n, b_plus={(0, 1): 1.0})
    i0 = basis_melnikov(P, reduce_to_basis(P, base), h_star)
    i1 = basis_melnikov(P, reduce_to_basis(P, kick), h_star)
    return base + kick.scaled(-i0 / i1)
