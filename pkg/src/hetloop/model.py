"""Unperturbed piecewise Hamiltonian system and the geometry of its period annulus.

The left half-plane carries ``x' = y, y' = a (x - b)^3`` (a nilpotent saddle at
``(b, 0)``), the right half-plane ``x' = y, y' = c (x - d)`` (a hyperbolic saddle
at ``(d, 0)``).  When ``a b^4 / 4 == c d^2 / 2`` both saddles sit on the same
energy level ``rho`` and the separatrices close into a heteroclinic loop that
bounds the family of periodic orbits ``H = h``, ``0 < h < rho``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintError, DomainError, SignError

__all__ = [
    "SystemParams",
    "LevelSetGeometry",
    "Equilibrium",
    "validate_params",
    "hamiltonian",
    "h_minus",
    "h_plus",
    "vector_field",
    "equilibria",
    "level_set_geometry",
    "check_energy",
    "CANONICAL",
]

_MATCH_RTOL = 1e-12


@dataclass(frozen=True)
class SystemParams:
    """Parameters ``a, b, c, d`` of the unperturbed system plus ``rho = a b^4 / 4``.

    Build instances with :func:`validate_params`; the constructor does not check
    anything.
    """

    a: float
    b: float
    c: float
    d: float
    rho: float

    @property
    def beta(self) -> float:
        """Lower limit ``(a/2)^{1/4} b`` of the left-side reduced integrals."""
        return (self.a / 2.0) ** 0.25 * self.b

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "d": self.d}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "SystemParams":
        try:
            return validate_params(float(obj["a"]), float(obj["b"]),
                                   float(obj["c"]), float(obj["d"]))
        except KeyError as exc:
            raise ConstraintError(f"missing parameter {exc.args[0]!r}") from None

    @classmethod
    def from_json(cls, text: str) -> "SystemParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class LevelSetGeometry:
    h: float
    x_left: float
    x_right: float
    a0: tuple[float, float]
    a1: tuple[float, float]


@dataclass(frozen=True)
class Equilibrium:
    """A singular point of the switching system.

    ``kind`` is one of ``"generalized-center"``, ``"nilpotent-saddle"``,
    ``"elementary-saddle"``.  ``jacobian`` is the linearization of the smooth
    piece owning the point, or ``None`` for the center, which lies on the
    switching line and is not a zero of either piece.
    """

    location: tuple[float, float]
    kind: str
    jacobian: np.ndarray | None = None

    @property
    def eigenvalues(self) -> np.ndarray | None:
        if self.jacobian is None:
            return None
        return np.sort(np.linalg.eigvals(self.jacobian).real)


def validate_params(a: float, b: float, c: float, d: float) -> SystemParams:
    """Check the sign conditions and the saddle-energy match, and fill in ``rho``.

    ``d`` is re-derived as ``sqrt(a b^4 / (2 c))`` once the match is accepted so
    that downstream turning-point formulas see an exactly consistent loop.

    Raises
    ------
    SignError
        unless ``a > 0, b < 0, c > 0, d > 0``.
    ConstraintError
        if ``|a b^4/4 - c d^2/2| > 1e-12 * max(1, a b^4/4)``.
    """
    a, b, c, d = float(a), float(b), float(c), float(d)
    bad = [name for name, ok in (("a", a > 0), ("b", b < 0), ("c", c > 0), ("d", d > 0)) if not ok]
    if bad:
        raise SignError(f"sign condition violated for {', '.join(bad)} "
                        "(need a > 0, b < 0, c > 0, d > 0)")
    rho = a * b**4 / 4.0
    gap = abs(rho - c * d * d / 2.0)
    if gap > _MATCH_RTOL * max(1.0, rho):
        raise ConstraintError(f"saddle energies differ: a b^4/4 = {rho!r}, "
                              f"c d^2/2 = {c * d * d / 2.0!r}")
    d = math.sqrt(a * b**4 / (2.0 * c))
    return SystemParams(a, b, c, d, rho)


CANONICAL = validate_params(2.0, -1.0, 1.0, 1.0)


def h_minus(P: SystemParams, x, y):
    """Left Hamiltonian written in factored form ``y^2/2 - a(x-b)^4/4 + rho``."""
    return 0.5 * np.square(y) - 0.25 * P.a * (np.asarray(x) - P.b) ** 4 + P.rho


def h_plus(P: SystemParams, x, y):
    return 0.5 * np.square(y) - 0.5 * P.c * np.square(x) + P.c * P.d * np.asarray(x)


def hamiltonian(P: SystemParams, x, y):
    """Piecewise Hamiltonian; the ``x >= 0`` branch owns the switching line."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.where(x < 0, h_minus(P, x, y), h_plus(P, x, y))
    return float(out) if out.ndim == 0 else out


def vector_field(P: SystemParams, x, y, piece: int | None = None):
    """Unperturbed field ``(x', y')``.

    ``piece`` forces the left (``-1``) or right (``+1``) formula; by default the
    side is picked from the sign of ``x`` with ``x = 0`` on the right.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    left = P.a * (x - P.b) ** 3
    right = P.c * (x - P.d)
    if piece is None:
        ydot = np.where(x < 0, left, right)
    else:
        ydot = left if piece < 0 else right
    return y + 0.0 * x, ydot


def equilibria(P: SystemParams) -> list[Equilibrium]:
    center = Equilibrium((0.0, 0.0), "generalized-center")
    nil = Equilibrium((P.b, 0.0), "nilpotent-saddle", np.array([[0.0, 1.0], [0.0, 0.0]]))
    sad = Equilibrium((P.d, 0.0), "elementary-saddle", np.array([[0.0, 1.0], [P.c, 0.0]]))
    return [center, nil, sad]


def _check_h(P: SystemParams, h: float) -> None:
    if not (0.0 < h < P.rho):
        raise DomainError(f"energy h={h!r} outside the period annulus (0, {P.rho!r})")


def level_set_geometry(P: SystemParams, h: float) -> LevelSetGeometry:
    """Turning points on the x-axis and y-axis crossings of the orbit ``H = h``."""
    _check_h(P, h)
    x_left = P.b + ((P.a * P.b**4 - 4.0 * h) / P.a) ** 0.25
    x_right = P.d - math.sqrt((P.c * P.d**2 - 2.0 * h) / P.c)
    s = math.sqrt(2.0 * h)
    return LevelSetGeometry(h, x_left, x_right, (0.0, -s), (0.0, s))


def check_energy(P: SystemParams, h: float) -> None:
    """Public form of the annulus check used by every energy-indexed routine."""
    _check_h(P, h)
