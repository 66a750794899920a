"""Two independent routes to the first-order Melnikov function agree.

The direct route integrates the perturbation 1-form along both arcs of L_h;
the basis route combines a handful of generator integrals with coefficients
obtained by Green's theorem and the one-step recursions.
"""

import numpy as np

from hetloop.melnikov import PerturbationCoeffs, basis_melnikov, direct_melnikov, reduce_to_basis
from hetloop.model import CANONICAL as P

C = PerturbationCoeffs(3, a_plus={(0, 0): 1.0, (0, 2): -0.4}, b_plus={(0, 1): -2.0, (0, 3): 0.3},
                       b_minus={(0, 1): 0.7, (1, 1): 0.2, (2, 1): -1.5})
B = reduce_to_basis(P, C)
print("basis coefficients:", {k: np.round(v, 6).tolist() for k, v in B.to_dict().items() if k != "n"})
print(f"\n{'h/rho':>8} {'direct':>22} {'basis':>22} {'diff':>10}")
for frac in (0.05, 0.25, 0.5, 0.75, 0.95, 0.9999):
    h = frac * P.rho
    d, b = direct_melnikov(P, C, h), basis_melnikov(P, B, h)
    print(f"{frac:8.4f} {d:22.15e} {b:22.15e} {abs(d - b):10.1e}")
