"""Geometry of the period annulus and its boundary loop.

Prints the three equilibria, a few closed level curves and their turning
points, and writes a phase portrait to ``demo_out/portrait.svg``.
"""

from pathlib import Path

import argparse

from hetloop.cli import resolve_config, run
from hetloop.model import CANONICAL as P, equilibria, level_set_geometry

print(f"parameters a={P.a} b={P.b} c={P.c} d={P.d}, loop energy rho={P.rho}")
for e in equilibria(P):
    print(f"  {e.kind:20s} at {e.location}")

print("\nclosed orbits L_h cross the switching line at (0, +-sqrt(2h)):")
for frac in (0.1, 0.5, 0.9, 0.999):
    g = level_set_geometry(P, frac * P.rho)
    print(f"  h = {frac:5.3f} rho: x from {g.x_left:+.6f} to {g.x_right:+.6f}")
print("the left turning point approaches the nilpotent saddle slowly (quartic well),")
print("the right one approaches the hyperbolic saddle quickly.")

out = Path("demo_out")
args = argparse.Namespace(command="phase-portrait", config=None, params=None, coeffs=None, n=None, ratio=None,
                          epsilon=None, grid=None, h_lo=None, h_hi=None, out=str(out), seed=None)
run("phase-portrait", resolve_config(args))
print(f"\nportrait written to {out / 'portrait.svg'}")
