"""Correlation, partial correlation and Kaiser-Meyer-Olkin sampling adequacy."""

from dataclasses import dataclass

import numpy as np

from .errors import NotFactorableError, SingularMatrixError, ValidationError

KMO_THRESHOLD = 0.6
MAX_CONDITION = 1e12


@dataclass
class CorrelationSummary:
    r_matrix: np.ndarray
    partials: np.ndarray
    kmo: float
    msa: np.ndarray
    n_observations: int

    @property
    def factorable(self):
        return self.kmo >= KMO_THRESHOLD

    @property
    def verdict(self):
        return "factorable" if self.factorable else "not factorable"


def _values(X):
    return np.asarray(getattr(X, "values", X), dtype=float)


def correlation_matrix(X, names=None):
    """
    Pearson correlation matrix of the columns of ``X``.

    ``X`` may be an AttributeMatrix or a plain 2-D array. Raises
    ValidationError for fewer than 3 rows or a constant column; the message
    names the column.
    """
    values = _values(X)
    if values.ndim != 2:
        raise ValidationError("expected a 2-D matrix")
    n, p = values.shape
    if n < 3:
        raise ValidationError(f"need at least 3 observations, got {n}")
    if names is None:
        from .ingest import ATTRIBUTES

        names = ATTRIBUTES if p == len(ATTRIBUTES) else [str(j) for j in range(p)]

    centered = values - values.mean(axis=0)
    ss = np.einsum("ij,ij->j", centered, centered)
    constant = np.ptp(values, axis=0) == 0
    for j in range(p):
        if constant[j] or not ss[j] > 0:
            raise ValidationError(f"column {names[j]!r} has zero variance")
    scaled = centered / np.sqrt(ss)
    R = scaled.T @ scaled
    R = (R + R.T) / 2
    np.fill_diagonal(R, 1.0)
    return np.clip(R, -1.0, 1.0)


def _checked_inverse(R):
    R = np.asarray(R, dtype=float)
    R = (R + R.T) / 2
    if not np.all(np.isfinite(R)):
        raise ValidationError("correlation matrix has non-finite entries")
    if np.linalg.cond(R) > MAX_CONDITION:
        raise SingularMatrixError(
            "correlation matrix is singular (multicollinearity); remove a redundant attribute"
        )
    return np.linalg.inv(R)


def partial_correlations(R):
    """Anti-image partial correlations from the inverse correlation matrix, unit diagonal."""
    inv = _checked_inverse(R)
    d = np.sqrt(np.diag(inv))
    P = -inv / np.outer(d, d)
    P = (P + P.T) / 2
    np.fill_diagonal(P, 1.0)
    return P


def kmo(R, return_msa=False):
    """
    Overall Kaiser-Meyer-Olkin statistic.

    With ``return_msa=True`` also returns the per-variable measures of
    sampling adequacy. Raises NotFactorableError when all off-diagonal
    correlations vanish (the statistic is 0/0).
    """
    R = np.asarray(R, dtype=float)
    R = (R + R.T) / 2
    P = partial_correlations(R)
    off = ~np.eye(R.shape[0], dtype=bool)
    r2 = np.where(off, R**2, 0.0)
    p2 = np.where(off, P**2, 0.0)
    total_r2 = r2.sum()
    if total_r2 == 0.0:
        raise NotFactorableError("KMO undefined: attributes are independent (all correlations zero)")
    value = float(total_r2 / (total_r2 + p2.sum()))
    if not return_msa:
        return value
    col_r2 = r2.sum(axis=0)
    denom = col_r2 + p2.sum(axis=0)
    msa = np.divide(col_r2, denom, out=np.full(len(denom), np.nan), where=denom > 0)
    return value, msa


def summarize(X):
    """Correlations, partials and KMO for an attribute matrix in one go."""
    R = correlation_matrix(X)
    value, msa = kmo(R, return_msa=True)
    return CorrelationSummary(R, partial_correlations(R), value, msa, _values(X).shape[0])


def pearson(x, y):
    """Product-moment correlation of two equal-length sequences."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("pearson needs two 1-D sequences of equal length")
    if len(x) < 3:
        raise ValidationError(f"pearson needs at least 3 pairs, got {len(x)}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = dx @ dx
    syy = dy @ dy
    if np.ptp(x) == 0 or np.ptp(y) == 0 or not (sxx > 0 and syy > 0):
        raise ValidationError("pearson undefined for a zero-variance sequence")
    r = (dx @ dy) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))
