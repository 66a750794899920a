"""Melnikov analysis of a piecewise Hamiltonian system with a heteroclinic loop.

The unperturbed system has an elementary saddle on the right, a nilpotent
saddle on the left and a period annulus bounded by the loop joining them.
The subpackages evaluate the first-order Melnikov function ``I(h)`` of
polynomial perturbations, its behaviour near the loop, designs with many
zeros, and direct simulations of the perturbed return map.
"""

__version__ = "0.1.0"

from .errors import HetloopError  # noqa: E402
from .model import CANONICAL, SystemParams, validate_params  # noqa: E402
from .melnikov import (BasisCoeffs, PerturbationCoeffs, basis_melnikov,  # noqa: E402
                       direct_melnikov, reduce_to_basis)

__all__ = [
    "__version__",
    "CANONICAL",
    "SystemParams",
    "validate_params",
    "PerturbationCoeffs",
    "BasisCoeffs",
    "direct_melnikov",
    "reduce_to_basis",
    "basis_melnikov",
    "HetloopError",
]
