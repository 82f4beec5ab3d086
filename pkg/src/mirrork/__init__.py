"""Algebraic K-theory of tori through equivariant homology of their mirror tori."""

from .errors import ConsistencyError, MirrorkError, UnsupportedError, ValidationError
from .exactalg import AbGroup
from .glattice import FiniteGroup, GLattice, Subgroup, enumerate_subgroups

__version__ = "0.1.0"

__all__ = [
    "AbGroup",
    "ConsistencyError",
    "FiniteGroup",
    "GLattice",
    "MirrorkError",
    "Subgroup",
    "UnsupportedError",
    "ValidationError",
    "enumerate_subgroups",
]
