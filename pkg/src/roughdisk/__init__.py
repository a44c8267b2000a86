"""Resistance of a rotating rough disk in a rarefied medium."""

from .errors import RoughDiskError
from .measures import CanonicalKind, Histogram, canonical_measure
from .resistance import ResistanceCoeffs, resistance_coeffs

__all__ = [
    "CanonicalKind",
    "Histogram",
    "ResistanceCoeffs",
    "RoughDiskError",
    "canonical_measure",
    "resistance_coeffs",
]
__version__ = "0.1.0"
