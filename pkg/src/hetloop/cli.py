"""Command-line front end: ``hetloop <command> [options]``.

Every run resolves a configuration from built-in defaults, an optional JSON
file (``--config``, which may also be a previously written ``manifest.json``)
and explicit flags, in that order of precedence, and writes
``manifest.json`` next to its outputs.  Outputs contain no timestamps and
floats are written with ``repr``, so identical configurations give
byte-identical files.

Exit status is 0 on success, 1 with a JSON error object on stdout when a
computation fails, and 2 for unusable configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cycles import cascade_design, isolate_zeros, melnikov_evaluator, one_zero_design
from .errors import HetloopError
from .expansion import asymptotic_fit, expansion_constants, loop_samples
from .melnikov import (MINUS, PLUS, PerturbationCoeffs, basis_melnikov, c_integral, direct_melnikov,
                       melnikov_arcs, orbit_points, recursion_check, reduce_to_basis, reduced_family_keys)
from .model import CANONICAL, SystemParams, equilibria, validate_params
from .simulate import (SimulationConfig, find_limit_cycle, integrate_piecewise, return_map_sweep,
                       write_sweep_csv, write_trajectory_csv)
from .svg import Figure

COMMANDS = ("phase-portrait", "melnikov-scan", "verify-recursions", "verify-reduction",
            "expansion", "design-zeros", "simulate", "find-cycles")

DEFAULTS = {
    "params": CANONICAL.to_dict(),
    "coeffs": None,
    "n": 1,
    "ratio": 1e-3,
    "epsilon": 1e-4,
    "grid": None,
    "h_lo": None,
    "h_hi": None,
    "out": "out",
    "seed": 0,
}

# per-command grid sizes and energy windows (fractions of rho) when not given
_GRID = {"phase-portrait": 6, "melnikov-scan": 200, "verify-recursions": 10,
         "verify-reduction": 50, "expansion": 40, "design-zeros": 240, "simulate": 8,
         "find-cycles": 200}
_WINDOW = {"verify-recursions": (0.05, 0.95), "verify-reduction": (0.02, 0.98),
           "simulate": (0.1, 0.8), "find-cycles": (0.05, 0.95)}

_RECURSION_TOL = 1e-8
_REDUCTION_TOL = 1e-6


class ConfigError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _load_json(path: str, what: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {what} file {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {path!r} is not valid JSON: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hetloop", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration or manifest")
    common.add_argument("--params", help="JSON file with a, b, c, d")
    common.add_argument("--coeffs", help="JSON file with perturbation coefficients")
    common.add_argument("--n", type=int, help="perturbation degree")
    common.add_argument("--ratio", type=float, help="cascade separation ratio")
    common.add_argument("--epsilon", type=float, help="perturbation size for simulations")
    common.add_argument("--grid", type=int, help="grid or sample count")
    common.add_argument("--h-lo", dest="h_lo", type=float, help="lower energy bound")
    common.add_argument("--h-hi", dest="h_hi", type=float, help="upper energy bound")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="seed for randomized test data")
    helps = {
        "phase-portrait": "SVG portrait with level sets, the loop and equilibria",
        "melnikov-scan": "CSV and SVG of I(h) on an energy grid",
        "verify-recursions": "residual table of the one-step C_ik recursion",
        "verify-reduction": "direct vs basis evaluation of I(h)",
        "expansion": "near-loop constants and asymptotic fits",
        "design-zeros": "cascade design and its zeros",
        "simulate": "trajectory and return-map sweep",
        "find-cycles": "limit cycles from simulation vs Melnikov zeros",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return ap


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        loaded = _load_json(args.config, "config")
        if isinstance(loaded, dict) and "config" in loaded and isinstance(loaded["config"], dict):
            loaded = loaded["config"]
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        loaded = {k: v for k, v in loaded.items() if k != "command"}
        unknown = sorted(set(loaded) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(loaded)
    if args.params:
        cfg["params"] = _load_json(args.params, "params")
    if args.coeffs:
        cfg["coeffs"] = _load_json(args.coeffs, "coeffs")
    for key in ("n", "ratio", "epsilon", "grid", "h_lo", "h_hi", "out", "seed"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    try:
        P = SystemParams.from_dict(cfg["params"])
    except (HetloopError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid params: {exc}") from None
    cfg["params"] = P.to_dict()
    if cfg["coeffs"] is not None:
        try:
            C = PerturbationCoeffs.from_dict(cfg["coeffs"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid coeffs: {exc}") from None
        cfg["coeffs"] = C.to_dict()
    if int(cfg["n"]) < 1:
        raise ConfigError("n must be >= 1")
    cfg["n"] = int(cfg["n"])
    cfg["seed"] = int(cfg["seed"])
    cfg["ratio"] = float(cfg["ratio"])
    cfg["epsilon"] = float(cfg["epsilon"])
    cfg["out"] = str(cfg["out"])
    cfg["command"] = args.command
    grid = cfg["grid"] if cfg["grid"] is not None else _GRID[args.command]
    cfg["grid"] = int(grid)
    lo_frac, hi_frac = _WINDOW.get(args.command, (0.02, 1.0 - 1e-8))
    cfg["h_lo"] = float(cfg["h_lo"]) if cfg["h_lo"] is not None else lo_frac * P.rho
    cfg["h_hi"] = float(cfg["h_hi"]) if cfg["h_hi"] is not None else hi_frac * P.rho
    if not 0.0 < cfg["h_lo"] < cfg["h_hi"] < P.rho:
        raise ConfigError(f"need 0 < h_lo < h_hi < rho = {P.rho!r}")
    return cfg


def _coeffs(cfg: dict, default: PerturbationCoeffs) -> PerturbationCoeffs:
    return PerturbationCoeffs.from_dict(cfg["coeffs"]) if cfg["coeffs"] else default


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _scan_plot(P, hs, vals, title, roots=()) -> Figure:
    vals = np.asarray(vals)
    lo, hi = float(np.min(vals)), float(np.max(vals))
    pad = 0.05 * (hi - lo or 1.0)
    fig = Figure((float(hs[0]), float(hs[-1])), (lo - pad, hi + pad), title=title,
                 xlabel="h", ylabel="I(h)")
    fig.hline(0.0)
    fig.line(hs, vals)
    if len(roots):
        fig.markers(roots, np.zeros(len(roots)))
    return fig


# -- commands ----------------------------------------------------------------

def cmd_phase_portrait(P, cfg, out):
    fig = Figure((P.b * 1.15, P.d * 1.15), (-1.25 * math.sqrt(2 * P.rho), 1.25 * math.sqrt(2 * P.rho)),
                 width=640, height=520, title="phase portrait", xlabel="x", ylabel="y")
    levels = [P.rho * (k + 1) / (cfg["grid"] + 1) for k in range(cfg["grid"])]
    for h in levels:
        x, y = orbit_points(P, h, 160)
        fig.line(x, y)
    # the loop: both saddle connections on each side
    xr = np.linspace(0.0, P.d, 200)
    yr = np.sqrt(np.maximum(2 * P.rho - (P.c * P.d * xr * 2 - P.c * xr * xr), 0.0))
    xl = np.linspace(P.b, 0.0, 200)
    yl = np.sqrt(np.maximum(0.5 * P.a * (xl - P.b) ** 4, 0.0))
    for sgn in (1.0, -1.0):
        fig.line(xr, sgn * yr, color="#b22222", width=1.6)
        fig.line(xl, sgn * yl, color="#b22222", width=1.6)
    fig.line([0.0, 0.0], fig.ylim, color="#888888", width=0.8, dash="2 3")
    eq = equilibria(P)
    fig.markers([e.location[0] for e in eq], [e.location[1] for e in eq], color="black")
    _write(out / "portrait.svg", fig.to_string())
    return {"levels": levels, "equilibria": [{"location": list(e.location), "kind": e.kind} for e in eq]}


def cmd_melnikov_scan(P, cfg, out):
    C = _coeffs(cfg, PerturbationCoeffs(cfg["n"], a_plus={(0, 0): 1.0}))
    hs = np.linspace(cfg["h_lo"], cfg["h_hi"], cfg["grid"])
    rows = []
    for h in hs:
        im, ip = melnikov_arcs(P, C, float(h))
        rows.append((float(h), im + ip, im, ip))
    _write(out / "melnikov.csv", _csv(["h", "I", "Iminus", "Iplus"], rows))
    _write(out / "melnikov.svg", _scan_plot(P, hs, [r[1] for r in rows], "I(h)").to_string())
    return {"samples": len(rows), "min": min(r[1] for r in rows), "max": max(r[1] for r in rows)}


def cmd_verify_recursions(P, cfg, out):
    hs = np.linspace(cfg["h_lo"], cfg["h_hi"], cfg["grid"])
    rows = []
    for side in (MINUS, PLUS):
        for i in range(4):
            for k in range(1, 5):
                for h in hs:
                    rows.append((side, i, k, float(h), recursion_check(P, side, i, k, float(h))))
    _write(out / "recursions.csv", _csv(["side", "i", "k", "h", "residual"], rows))
    worst = max(r[4] for r in rows)
    summary = {"checks": len(rows), "max_residual": worst, "tolerance": _RECURSION_TOL,
               "passed": worst <= _RECURSION_TOL}
    _write(out / "recursions.json", _dump(summary))
    if not summary["passed"]:
        raise HetloopError(f"recursion residual {worst:.3e} exceeds {_RECURSION_TOL:g}")
    return summary


def _random_reduced(n: int, rng: np.random.Generator) -> PerturbationCoeffs:
    C = PerturbationCoeffs.zero(n)
    for side, ab, ij in reduced_family_keys(n):
        kw = {"a_plus": {}, "b_plus": {}, "a_minus": {}, "b_minus": {}}
        kw[f"{ab}_{side}"] = {ij: float(rng.uniform(-1.0, 1.0))}
        C = C + PerturbationCoeffs(n, **kw)
    return C


def cmd_verify_reduction(P, cfg, out):
    rng = np.random.default_rng(cfg["seed"])
    C = _coeffs(cfg, None) if cfg["coeffs"] else _random_reduced(cfg["n"], rng)
    B = reduce_to_basis(P, C)
    hs = np.linspace(cfg["h_lo"], cfg["h_hi"], cfg["grid"])
    rows = []
    for h in hs:
        d = direct_melnikov(P, C, float(h))
        b = basis_melnikov(P, B, float(h))
        rows.append((float(h), d, b, abs(d - b) / (1.0 + abs(d))))
    _write(out / "reduction.csv", _csv(["h", "direct", "basis", "scaled_diff"], rows))
    worst = max(r[3] for r in rows)
    summary = {"coeffs": C.to_dict(), "basis": B.to_dict(), "max_scaled_diff": worst,
               "tolerance": _REDUCTION_TOL, "passed": worst <= _REDUCTION_TOL}
    _write(out / "reduction.json", _dump(summary))
    if not summary["passed"]:
        raise HetloopError(f"direct and basis values differ by {worst:.3e}")
    return {"max_scaled_diff": worst, "passed": summary["passed"]}


def cmd_expansion(P, cfg, out):
    consts = expansion_constants(P)
    fits = {}
    n = max(cfg["n"], 3)
    for name, side, i in (("C00+", PLUS, 0), ("C00-", MINUS, 0), ("C10-", MINUS, 1), ("C20-", MINUS, 2)):
        samples = loop_samples(P, lambda h, side=side, i=i: c_integral(P, side, i, 0, h), cfg["grid"])
        fits[name] = asymptotic_fit(samples, n, rho=P.rho).to_dict()
    report = {"fit_degree": n, "constants": consts.to_dict(), "fits": fits,
              "checks": {
                  "eta0_from_fit": -fits["C00+"]["c0"][0],
                  "sigma1_from_fit": fits["C10-"]["c0"][0],
                  "sigma0_from_fit": fits["C00-"]["c3"][0],
                  "sigma2_from_fit": fits["C20-"]["c2"][0] if fits["C20-"]["c2"] else None}}
    _write(out / "expansion.json", _dump(report))
    return report["checks"]


def cmd_design_zeros(P, cfg, out):
    D = cascade_design(P, cfg["n"], cfg["ratio"], grid_size=cfg["grid"])
    _write(out / "design.json", _dump(D.to_dict()))
    _write(out / "roots.json", _dump(D.roots.to_dict()))
    _write(out / "coeffs.json", _dump(D.coeffs.to_dict()))
    f = melnikov_evaluator(P, D.coeffs)
    dist = np.geomspace(0.5 * P.rho, 1e-8 * P.rho, 300)
    vals = np.array([f(P.rho - d)[0] for d in dist])
    fig = Figure((float(np.log10(dist[-1] / P.rho)), float(np.log10(dist[0] / P.rho))), (-1.1, 1.1),
                 title="sign pattern of I(h) near the loop", xlabel="log10((rho - h)/rho)",
                 ylabel="sign(I) |I|^(1/8), normalized")
    # compress the dynamic range so every sign change is visible
    shown = np.sign(vals) * np.abs(vals) ** 0.125
    shown = shown / np.max(np.abs(shown))
    fig.hline(0.0)
    fig.line(np.log10(dist / P.rho), shown)
    roots = D.roots.h
    if roots.size:
        fig.markers(np.log10((P.rho - roots) / P.rho), np.zeros(roots.size))
    _write(out / "design.svg", fig.to_string())
    return {"found_zero_count": D.roots.simple_count, "target_zero_count": D.target_zero_count,
            "achievable_zero_count": D.achievable_zero_count, "ratio": D.ratio, "notes": D.notes()}


def _sim_config(cfg) -> SimulationConfig:
    return SimulationConfig(epsilon=cfg["epsilon"])


def cmd_simulate(P, cfg, out):
    C = _coeffs(cfg, PerturbationCoeffs(cfg["n"], a_plus={(0, 0): 1.0}))
    sc = _sim_config(cfg)
    y0 = math.sqrt(2.0 * cfg["h_lo"])
    tr = integrate_piecewise(P, C, sc, (0.0, y0), max_crossings=2)
    _write(out / "trajectory.csv", write_trajectory_csv(tr))
    hs = np.linspace(cfg["h_lo"], cfg["h_hi"], cfg["grid"])
    samples = return_map_sweep(P, C, sc, hs)
    _write(out / "sweep.csv", write_sweep_csv(samples))
    rows = []
    for s in samples:
        I = direct_melnikov(P, C, s.h_in)
        rows.append((s.h_in, s.displacement / sc.epsilon if sc.epsilon else 0.0, I))
    _write(out / "consistency.csv", _csv(["h", "displacement_over_epsilon", "melnikov"], rows))
    return {"trajectory_points": int(tr.t.size), "sweep": len(samples)}


def cmd_find_cycles(P, cfg, out):
    C = _coeffs(cfg, one_zero_design(P, 0.5 * P.rho, cfg["n"]))
    sc = _sim_config(cfg)
    roots = isolate_zeros(P, C, cfg["h_lo"], cfg["h_hi"], cfg["grid"])
    rows = []
    for r in roots.roots:
        if P.rho - r.h < 1e-2 * P.rho:
            rows.append((r.h, "nan", "nan", "nan", "too close to the loop"))
            continue
        half = 0.02 * P.rho
        bracket = (max(r.h - half, 0.5 * r.h), min(r.h + half, 0.5 * (r.h + P.rho)))
        try:
            h_star, period = find_limit_cycle(P, C, sc, bracket)
        except HetloopError as exc:
            rows.append((r.h, "nan", "nan", "nan", type(exc).__name__))
            continue
        rows.append((r.h, h_star, period, abs(h_star - r.h), "ok"))
    _write(out / "cycles.csv", _csv(["melnikov_h", "cycle_h", "period", "abs_diff", "status"], rows))
    _write(out / "roots.json", _dump(roots.to_dict()))
    return {"melnikov_zeros": len(roots), "cycles": sum(r[4] == "ok" for r in rows)}


HANDLERS = {
    "phase-portrait": cmd_phase_portrait,
    "melnikov-scan": cmd_melnikov_scan,
    "verify-recursions": cmd_verify_recursions,
    "verify-reduction": cmd_verify_reduction,
    "expansion": cmd_expansion,
    "design-zeros": cmd_design_zeros,
    "simulate": cmd_simulate,
    "find-cycles": cmd_find_cycles,
}


def run(command: str, cfg: dict) -> dict:
    """Execute one command with a resolved configuration; returns its summary."""
    P = validate_params(**cfg["params"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    summary = HANDLERS[command](P, cfg, out)
    _write(out / "manifest.json", _dump({"command": command, "config": cfg, "version": __version__,
                                         "summary": summary}))
    return summary


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        sys.stdout.write(_dump({"error": "ConfigError", "message": str(exc)}))
        return 2
    try:
        summary = run(args.command, cfg)
    except HetloopError as exc:
        sys.stdout.write(_dump(exc.to_dict()))
        return 1
    sys.stdout.write(_dump(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
