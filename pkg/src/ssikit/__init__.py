"""Slum severity index from census deprivation attributes, validated against GLCM texture."""

__version__ = "0.1.0"

from .efa import FactorSolution, SsiVector, compute_ssi, find_modes, principal_axis_factor, weights
from .errors import ConfigError, NotFactorableError, RowError, SingularMatrixError, SsiError, ValidationError
from .ingest import ATTRIBUTES, AttributeMatrix, BlockRecord, aggregate_ssi, derive_attributes, parse_census
from .stats import correlation_matrix, kmo, partial_correlations, pearson

__all__ = [
    "ATTRIBUTES",
    "AttributeMatrix",
    "BlockRecord",
    "ConfigError",
    "FactorSolution",
    "NotFactorableError",
    "RowError",
    "SingularMatrixError",
    "SsiError",
    "SsiVector",
    "ValidationError",
    "aggregate_ssi",
    "compute_ssi",
    "correlation_matrix",
    "derive_attributes",
    "find_modes",
    "kmo",
    "parse_census",
    "partial_correlations",
    "pearson",
    "principal_axis_factor",
    "weights",
]
