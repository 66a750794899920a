"""Direct simulation of the perturbed switching system and its return map.

The perturbed field is ``x' = y + eps p^+-(x, y)``, ``y' = F^+-(x) + eps q^+-(x, y)``
with the right piece owning ``x = 0``.  Trajectories are integrated piece by
piece with DOP853; each crossing of ``x = 0`` ends the current solve, is
checked against the event tolerance, and restarts the integration on the
other piece from exactly ``x = 0``.

Starting on the section ``x = 0, y > 0`` the orbit enters the right half
plane, crosses back with ``y < 0`` and returns to the section after two
crossings.  Energies on the section are ``H(0, y) = y^2 / 2`` on both pieces.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import EventFailure, HorizonReached, LeftLoopRegion, NoReturn, NoSignChange
from .melnikov import MINUS, PLUS, PerturbationCoeffs
from .model import SystemParams, check_energy, hamiltonian

__all__ = [
    "SimulationConfig",
    "SwitchEvent",
    "Trajectory",
    "ReturnSample",
    "integrate_piecewise",
    "return_map",
    "return_map_sweep",
    "find_limit_cycle",
    "write_trajectory_csv",
    "write_sweep_csv",
]


@dataclass(frozen=True)
class SimulationConfig:
    """Integrator settings.

    ``epsilon = 0`` is accepted so that unperturbed runs can be made with the
    same machinery; :func:`find_limit_cycle` rejects it.
    """

    epsilon: float = 1e-4
    step_tol: float = 1e-12
    event_tol: float = 1e-12
    max_time: float = 500.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1e-2:
            raise ValueError("epsilon must lie in [0, 1e-2]")
        if not (self.step_tol > 0 and self.event_tol > 0 and self.max_time > 0):
            raise ValueError("step_tol, event_tol and max_time must be positive")

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "step_tol": self.step_tol,
                "event_tol": self.event_tol, "max_time": self.max_time}


@dataclass(frozen=True)
class SwitchEvent:
    t: float
    y: float
    residual: float          # |x| at the located crossing, before projection
    from_piece: int
    to_piece: int


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    piece: np.ndarray
    switches: list[SwitchEvent] = field(default_factory=list)

    def energy(self, P: SystemParams) -> np.ndarray:
        return np.asarray(hamiltonian(P, self.x, self.y))


@dataclass(frozen=True)
class ReturnSample:
    h_in: float
    h_out: float
    flight_time: float
    crossings: int

    @property
    def displacement(self) -> float:
        return self.h_out - self.h_in


def _compile(coeffs: dict):
    items = [(i, j, v) for (i, j), v in sorted(coeffs.items())]

    def poly(x, y):
        return sum(v * x**i * y**j for i, j, v in items)
    return poly


def _rhs(P: SystemParams, C: PerturbationCoeffs, eps: float, piece: int):
    side = PLUS if piece > 0 else MINUS
    a_map, b_map = C.maps(side)
    p, q = _compile(a_map), _compile(b_map)
    if piece > 0:
        def f(t, z):
            x, y = z
            return [y + eps * p(x, y), P.c * (x - P.d) + eps * q(x, y)]
    else:
        def f(t, z):
            x, y = z
            return [y + eps * p(x, y), P.a * (x - P.b) ** 3 + eps * q(x, y)]
    return f


def integrate_piecewise(P: SystemParams, C: PerturbationCoeffs, cfg: SimulationConfig,
                        start: tuple[float, float], t_max: float | None = None,
                        max_crossings: int | None = None) -> Trajectory:
    """Integrate from ``start`` until ``t_max`` or after ``max_crossings`` switches.

    A start on ``x = 0`` is integrated on the piece the orbit moves into.

    Raises
    ------
    EventFailure
        if a crossing is not located to ``|x| <= event_tol`` or the orbit meets
        the switching line (nearly) tangentially.
    LeftLoopRegion
        if the orbit passes a saddle abscissa, so it cannot close up.
    HorizonReached
        if ``t_max`` is reached first (only when ``max_crossings`` is set).
    """
    t_max = cfg.max_time if t_max is None else t_max
    x0, y0 = map(float, start)
    if not P.b < x0 < P.d:
        raise ValueError("start must lie strictly between the saddle abscissas")
    eps = cfg.epsilon
    fields = {1: _rhs(P, C, eps, 1), -1: _rhs(P, C, eps, -1)}
    # on the switching line the right field decides which side the orbit enters
    piece = 1 if x0 > 0 or (x0 == 0 and fields[1](0.0, [x0, y0])[0] >= 0) else -1
    t = 0.0
    z = np.array([x0, y0])
    ts, xs, ys, ps = [np.array([t])], [np.array([x0])], [np.array([y0])], [np.array([piece])]
    switches: list[SwitchEvent] = []

    def traj():
        return Trajectory(np.concatenate(ts), np.concatenate(xs), np.concatenate(ys),
                          np.concatenate(ps), list(switches))

    while t < t_max:
        def cross(tt, zz):
            return zz[0]
        cross.terminal = True
        cross.direction = -piece

        def escape(tt, zz, wall=P.d if piece > 0 else P.b):
            return zz[0] - wall
        escape.terminal = True
        escape.direction = piece

        sol = solve_ivp(fields[piece], (t, t_max), z, method="DOP853", rtol=cfg.step_tol,
                        atol=cfg.step_tol, events=(cross, escape))
        if sol.status == -1:
            raise EventFailure(f"integrator failure: {sol.message}")
        ts.append(sol.t[1:])
        xs.append(sol.y[0, 1:])
        ys.append(sol.y[1, 1:])
        ps.append(np.full(sol.t.size - 1, piece))
        if sol.t_events[1].size:
            raise LeftLoopRegion(f"orbit crossed the saddle abscissa x={'d' if piece > 0 else 'b'} "
                                 f"at t={sol.t_events[1][0]:.6g}", traj())
        if not sol.t_events[0].size:
            break
        te = float(sol.t_events[0][0])
        xe, ye = map(float, sol.y_events[0][0])
        if abs(xe) > cfg.event_tol:
            raise EventFailure(f"crossing at t={te:.17g} located only to |x|={abs(xe):.3g}")
        xdot = fields[piece](te, [0.0, ye])[0]
        if abs(xdot) < math.sqrt(cfg.event_tol):
            raise EventFailure(f"grazing contact with the switching line at t={te:.17g} "
                               f"(x'={xdot:.3g})")
        switches.append(SwitchEvent(te, ye, abs(xe), piece, -piece))
        piece = -piece
        t = te
        z = np.array([0.0, ye])
        ts.append(np.array([te]))
        xs.append(np.array([0.0]))
        ys.append(np.array([ye]))
        ps.append(np.array([piece]))
        if max_crossings is not None and len(switches) >= max_crossings:
            return traj()
    if max_crossings is not None:
        raise HorizonReached(f"horizon t={t_max:g} reached after {len(switches)} crossings", traj())
    return traj()


def return_map(P: SystemParams, C: PerturbationCoeffs, cfg: SimulationConfig, y0: float) -> ReturnSample:
    """First return of the orbit through ``(0, y0)`` to the upper section.

    Raises
    ------
    NoReturn
        if the orbit leaves the loop region or does not come back within
        ``cfg.max_time``.
    """
    if not 0.0 < y0 < math.sqrt(2.0 * P.rho):
        raise ValueError("y0 must lie in (0, sqrt(2 rho))")
    try:
        tr = integrate_piecewise(P, C, cfg, (0.0, y0), max_crossings=2)
    except HorizonReached as exc:
        raise NoReturn(f"no return to the section from y0={y0!r}: {exc}") from exc
    last = tr.switches[-1]
    if last.to_piece != 1 or last.y <= 0:
        raise NoReturn(f"second crossing from y0={y0!r} is not on the upper section")
    return ReturnSample(0.5 * y0 * y0, 0.5 * last.y * last.y, last.t, len(tr.switches))


def return_map_sweep(P: SystemParams, C: PerturbationCoeffs, cfg: SimulationConfig,
                     h_values) -> list[ReturnSample]:
    out = []
    for h in h_values:
        check_energy(P, h)
        out.append(return_map(P, C, cfg, math.sqrt(2.0 * h)))
    return out


def find_limit_cycle(P: SystemParams, C: PerturbationCoeffs, cfg: SimulationConfig,
                     h_bracket: tuple[float, float], max_iter: int = 80) -> tuple[float, float]:
    """Fixed point of the return map inside ``h_bracket``, found by bisection on ``y0``.

    Returns ``(h_star, period)``.

    Raises
    ------
    NoSignChange
        if the displacement has the same sign at both ends of the bracket.
    """
    if cfg.epsilon == 0.0:
        raise ValueError("find_limit_cycle needs epsilon > 0; at epsilon = 0 every orbit is closed")
    h_lo, h_hi = sorted(map(float, h_bracket))
    check_energy(P, h_lo)
    check_energy(P, h_hi)
    lo, hi = math.sqrt(2.0 * h_lo), math.sqrt(2.0 * h_hi)
    s_lo = return_map(P, C, cfg, lo)
    s_hi = return_map(P, C, cfg, hi)
    d_lo, d_hi = s_lo.displacement, s_hi.displacement
    if d_lo == 0.0:
        return s_lo.h_in, s_lo.flight_time
    if d_hi == 0.0:
        return s_hi.h_in, s_hi.flight_time
    if (d_lo > 0) == (d_hi > 0):
        raise NoSignChange(f"displacement has one sign on [{h_lo!r}, {h_hi!r}]: "
                           f"{d_lo:.3e}, {d_hi:.3e}")
    best = s_lo if abs(d_lo) < abs(d_hi) else s_hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        s = return_map(P, C, cfg, mid)
        if abs(s.displacement) < abs(best.displacement):
            best = s
        if s.displacement == 0.0 or abs(s.displacement) <= cfg.step_tol:
            best = s
            break
        if (s.displacement > 0) == (d_lo > 0):
            lo, d_lo = mid, s.displacement
        else:
            hi = mid
    return best.h_in, best.flight_time


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trajectory_csv(tr: Trajectory, fh: io.TextIOBase | None = None) -> str:
    buf = fh or io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x", "y", "piece"])
    for row in zip(tr.t, tr.x, tr.y, tr.piece):
        w.writerow([_fmt(row[0]), _fmt(row[1]), _fmt(row[2]), int(row[3])])
    return buf.getvalue() if fh is None else ""


def write_sweep_csv(samples: list[ReturnSample], fh: io.TextIOBase | None = None) -> str:
    buf = fh or io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["h_in", "h_out", "displacement"])
    for s in samples:
        w.writerow([_fmt(s.h_in), _fmt(s.h_out), _fmt(s.displacement)])
    return buf.getvalue() if fh is None else ""
