import io
import math

import numpy as np
import pytest

from hetloop.cycles import isolate_zeros, one_zero_design
from hetloop.errors import HorizonReached, LeftLoopRegion, NoReturn, NoSignChange
from hetloop.melnikov import PerturbationCoeffs, direct_melnikov
from hetloop.model import CANONICAL
from hetloop.simulate import (ReturnSample, SimulationConfig, find_limit_cycle, integrate_piecewise,
                              return_map, return_map_sweep, write_sweep_csv, write_trajectory_csv)

P = CANONICAL
ZERO = PerturbationCoeffs.zero(1)
A00 = PerturbationCoeffs(1, a_plus={(0, 0): 1.0})
STILL = SimulationConfig(epsilon=0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        SimulationConfig(epsilon=0.1)
    with pytest.raises(ValueError):
        SimulationConfig(epsilon=-1e-4)
    with pytest.raises(ValueError):
        SimulationConfig(step_tol=0.0)
    assert SimulationConfig().to_dict() == {"epsilon": 1e-4, "step_tol": 1e-12, "event_tol": 1e-12, "max_time": 500.0}


def test_conservation_on_level():
    tr = integrate_piecewise(P, ZERO, STILL, (0.0, 0.6), t_max=60.0)
    assert np.max(np.abs(tr.energy(P) - 0.18)) <= 10 * STILL.step_tol


def test_orbits_near_center_cross_twice_per_period():
    tr = integrate_piecewise(P, ZERO, STILL, (0.0, 0.01), t_max=1.0)
    pieces = [s.from_piece for s in tr.switches]
    assert pieces == [1, -1] * (len(pieces) // 2) + [1] * (len(pieces) % 2)
    r = return_map(P, ZERO, STILL, 0.01)
    assert r.crossings == 2 and r.flight_time > 0


@pytest.mark.parametrize("y0", [1.0, 1.2])
def test_outside_annulus_escapes(y0):
    with pytest.raises(HorizonReached):
        integrate_piecewise(P, ZERO, STILL, (0.0, y0), max_crossings=2)
    with pytest.raises(LeftLoopRegion):
        integrate_piecewise(P, ZERO, STILL, (0.0, y0), max_crossings=2)


def test_start_must_lie_between_saddles():
    with pytest.raises(ValueError):
        integrate_piecewise(P, ZERO, STILL, (1.5, 0.0))


def test_horizon_reached():
    with pytest.raises(HorizonReached) as info:
        integrate_piecewise(P, ZERO, STILL, (0.0, 0.6), t_max=0.1, max_crossings=2)
    assert info.value.trajectory is not None


def test_return_map_unperturbed():
    r = return_map(P, ZERO, STILL, 0.6)
    assert r.h_in == pytest.approx(0.18, abs=1e-16)
    assert abs(r.h_out - r.h_in) <= 10 * STILL.step_tol
    assert r.crossings == 2


def test_return_map_domain():
    with pytest.raises(ValueError):
        return_map(P, ZERO, STILL, 1.0)


def test_return_map_first_order():
    cfg = SimulationConfig(epsilon=1e-4)
    r = return_map(P, A00, cfg, 0.6)
    assert r.displacement / cfg.epsilon == pytest.approx(1.2, rel=0.05)
    assert r.displacement / cfg.epsilon == pytest.approx(direct_melnikov(P, A00, 0.18), rel=0.05)


def test_richardson_ratio():
    a = return_map(P, A00, SimulationConfig(epsilon=1e-4), 0.6).displacement
    b = return_map(P, A00, SimulationConfig(epsilon=5e-5), 0.6).displacement
    assert a / b == pytest.approx(2.0, rel=0.02)


def test_melnikov_consistency_scaling():
    res = {}
    for eps in (1e-3, 1e-4):
        cfg = SimulationConfig(epsilon=eps)
        res[eps] = max(abs(s.displacement / eps - direct_melnikov(P, A00, s.h_in))
                       for s in return_map_sweep(P, A00, cfg, (0.1, 0.2, 0.3, 0.4)))
    assert math.log10(res[1e-3] / res[1e-4]) >= 0.9


def test_time_reversal():
    fwd = integrate_piecewise(P, ZERO, STILL, (0.0, 0.6), max_crossings=2)
    end = fwd.switches[-1]
    # reflecting y reverses time for both pieces
    back = integrate_piecewise(P, ZERO, STILL, (0.0, -end.y), max_crossings=2)
    assert abs(-back.switches[-1].y - 0.6) <= 100 * STILL.step_tol


def test_event_correctness():
    cfg = SimulationConfig(epsilon=1e-4)
    tr = integrate_piecewise(P, A00, cfg, (0.0, 0.6), t_max=40.0)
    assert len(tr.switches) > 10
    for s in tr.switches:
        assert s.residual <= cfg.event_tol and s.to_piece == -s.from_piece
    change = np.flatnonzero(np.diff(tr.piece) != 0)
    np.testing.assert_array_equal(tr.t[change + 1], [s.t for s in tr.switches])
    np.testing.assert_array_equal(tr.x[change + 1], 0.0)
    inside = tr.x[tr.piece == -1]
    assert np.all(inside <= cfg.event_tol)
    assert np.all(tr.x[tr.piece == 1] >= -cfg.event_tol)


def test_positive_melnikov_has_no_cycle():
    with pytest.raises(NoSignChange):
        find_limit_cycle(P, A00, SimulationConfig(), (0.1, 0.4))


def test_find_limit_cycle_rejects_zero_epsilon():
    with pytest.raises(ValueError):
        find_limit_cycle(P, A00, STILL, (0.1, 0.4))


@pytest.fixture(scope="module")
def located():
    C = one_zero_design(P, 0.25)
    cfg = SimulationConfig()
    h_star, period = find_limit_cycle(P, C, cfg, (0.2, 0.3))
    return C, cfg, h_star, period


def test_limit_cycle_matches_melnikov_zero(located):
    C, cfg, h_star, period = located
    roots = isolate_zeros(P, C, 0.01, P.rho * (1 - 1e-8))
    assert len(roots) == 1
    assert abs(h_star - roots.h[0]) <= 1e-2 * P.rho
    assert period > 0
    r = return_map(P, C, cfg, math.sqrt(2 * h_star))
    assert abs(r.displacement) <= 10 * cfg.step_tol


def test_limit_cycle_is_isolated(located):
    C, cfg, h_star, _ = located
    lo = return_map(P, C, cfg, math.sqrt(2 * (h_star - 1e-3 * P.rho))).displacement
    hi = return_map(P, C, cfg, math.sqrt(2 * (h_star + 1e-3 * P.rho))).displacement
    assert lo * hi < 0


def test_csv_writers():
    tr = integrate_piecewise(P, ZERO, STILL, (0.0, 0.3), max_crossings=2)
    text = write_trajectory_csv(tr)
    lines = text.splitlines()
    assert lines[0] == "t,x,y,piece" and len(lines) == tr.t.size + 1
    assert float(lines[1].split(",")[2]) == 0.3
    buf = io.StringIO()
    write_sweep_csv([ReturnSample(0.1, 0.2, 1.0, 2)], buf)
    assert buf.getvalue() == "h_in,h_out,displacement\n0.1,0.2,0.1\n"


def test_no_return_when_pushed_out():
    # strong outward push near the loop, energy leaves the annulus
    C = PerturbationCoeffs(1, a_plus={(0, 0): 1.0})
    with pytest.raises(NoReturn):
        return_map(P, C, SimulationConfig(epsilon=1e-2), math.sqrt(2 * (P.rho - 1e-4)))
