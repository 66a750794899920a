"""The generator integrals near the loop and their asymptotic constants.

As h tends to rho the generators mix a logarithm (from the hyperbolic saddle)
with the fractional powers |u|^(3/4) and |u|^(5/4) (from the nilpotent one).
The fitted coefficients approach the series constants as the fit degree
grows.
"""

from hetloop.expansion import asymptotic_fit, expansion_constants, loop_samples
from hetloop.melnikov import MINUS, PLUS, c_integral
from hetloop.model import CANONICAL as P

k = expansion_constants(P)
print(f"series constants: eta0={k.eta0}, sigma0={k.sigma0:.12f}, sigma1={k.sigma1}, sigma2={k.sigma2:.12f}")
print("\ndegree  -fit(u ln|u|) of C00+   fit |u|^(3/4) of C00-   fit |u|^(5/4) of C20-")
# even degrees add no new near-loop terms, so only odd ones are shown
for n in (1, 3):
    f0 = asymptotic_fit(loop_samples(P, lambda h: c_integral(P, PLUS, 0, 0, h)), n, rho=P.rho)
    f1 = asymptotic_fit(loop_samples(P, lambda h: c_integral(P, MINUS, 0, 0, h)), n, rho=P.rho)
    f2 = asymptotic_fit(loop_samples(P, lambda h: c_integral(P, MINUS, 2, 0, h)), max(n, 3), rho=P.rho)
    print(f"{n:6d}  {-f0.coef('c0', 1):24.6f}   {f1.coef('c3', 0):21.6f}   {f2.coef('c2', 1):21.6f}")
