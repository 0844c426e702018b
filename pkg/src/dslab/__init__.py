"""Exact-arithmetic laboratory for metric Diophantine approximation.

Approximation sets and their overlaps are computed as exact rationals;
transcendental thresholds are decided by certified interval evaluation.
"""

from .certified import Enclosure, Real
from .gcdgraph import GcdGraph
from .intervals import TorusIntervalUnion, approx_set, overlap_crt, overlap_exact, psi_mass
from .psi import PsiFunction, generate_psi

__version__ = "0.1.0"

__all__ = [
    "Enclosure",
    "GcdGraph",
    "PsiFunction",
    "Real",
    "TorusIntervalUnion",
    "approx_set",
    "generate_psi",
    "overlap_crt",
    "overlap_exact",
    "psi_mass",
]
