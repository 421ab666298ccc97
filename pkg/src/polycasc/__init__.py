"""polycasc: a Monte Carlo and exact-enumeration laboratory for directed
lattice polymers, their multiplicative-cascade block approximation, and
classical spin glasses, with a statistical engine for verifying stochastic
order relations (usual, convex, Laplace transform) between the models."""

__version__ = "1.0.0"

from .env import DisorderField, DisorderLaw, cumulant, sample_field
from .rng import RngPolicy

__all__ = [
    "DisorderField",
    "DisorderLaw",
    "RngPolicy",
    "cumulant",
    "sample_field",
    "__version__",
]
