"""Exact computations for Lie pairs: Fedosov resolutions, Atiyah and Todd
cocycles, polyvector and polydifferential complexes, Kontsevich graph weights
and the Duflo isomorphism."""

from .graded import Derivation, Frame, GradedElement
from .liepair import ConnectionSpec, LiePairSpec, PreconditionError, validate

__all__ = ["Derivation", "Frame", "GradedElement", "ConnectionSpec", "LiePairSpec", "PreconditionError", "validate"]
__version__ = "0.1.0"
