"""Exact Wiener-chaos expansion of the self-normalized Gaussian sum and its normal-approximation bounds."""

__version__ = "0.1.0"

from .coefficients import (
    CoefficientTable,
    MissingCoefficientError,
    chaos_norm_partial,
    coefficient,
    coefficient_via_moments,
    k0_coefficient,
    table_build,
)
from .patterns import MultiplicityPattern, canonicalize, enumerate_patterns, is_vanishing, tuple_count

__all__ = [
    "CoefficientTable",
    "MissingCoefficientError",
    "MultiplicityPattern",
    "canonicalize",
    "chaos_norm_partial",
    "coefficient",
    "coefficient_via_moments",
    "enumerate_patterns",
    "is_vanishing",
    "k0_coefficient",
    "table_build",
    "tuple_count",
]
