"""Pfaffian point processes of branching-coalescing and annihilating-immigrating walks.

Submodules
----------
pfaffian      numerically stable Pfaffians of antisymmetric matrices
lattice       models, exact master-equation engine and observables
duality       scalar kernels: definitional and pair-equation routes, equilibria
pointprocess  block kernels, intensities, thinning/thickening, product laws
montecarlo    seeded Gillespie simulation and estimators
continuum     diffusive-limit kernels, firework, net solver
harness, cli  verification suites and the ``ipps`` command
"""

from .errors import ConfigError, InputError, IppsError, StructureError, WindowTooLargeError
from .lattice import ARWPI, BCRW, OccupancyConfig, StateDistribution
from .pfaffian import pfaffian

__version__ = "0.1.0"

__all__ = [
    "ARWPI",
    "BCRW",
    "ConfigError",
    "InputError",
    "IppsError",
    "OccupancyConfig",
    "StateDistribution",
    "StructureError",
    "WindowTooLargeError",
    "pfaffian",
]
