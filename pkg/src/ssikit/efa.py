"""
Single-factor exploratory factor analysis and the slum severity index.

The index of a block is the dot product of its attribute row with the
communalities of a one-factor solution, normalized to sum to one. Because
the weights are non-negative and sum to one, the index stays in [0, 1]
whenever the attributes do.
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from ._io import atomic_write, fmt
from .errors import NotFactorableError, ValidationError
from .stats import _checked_inverse

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 200


@dataclass
class FactorSolution:
    loadings: np.ndarray
    communalities: np.ndarray
    weights: np.ndarray
    iterations: int
    converged: bool
    tolerance: float
    eigenvalue: float = float("nan")


@dataclass
class SsiVector:
    block_ids: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.block_ids) != len(self.values):
            raise ValidationError("block_ids and SSI values differ in length")

    def __len__(self):
        return len(self.block_ids)

    def as_dict(self):
        return dict(zip(self.block_ids, self.values.tolist()))


def initial_communalities(R):
    """Squared multiple correlations, ``1 - 1/diag(inv(R))``."""
    inv = _checked_inverse(R)
    smc = 1.0 - 1.0 / np.diag(inv)
    return np.clip(smc, 0.0, 1.0)


def principal_axis_factor(R, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """
    Extract one factor by principal axis factoring with iterated communalities.

    Starting from the squared multiple correlations, the diagonal of ``R`` is
    replaced by the current communalities, the leading eigenpair of this
    reduced matrix gives the loadings, and their squares become the next
    communalities. Iteration stops once no communality moves by ``tol`` or
    more. The loading vector is oriented so its sum is non-negative.

    Raises
    ------
    NotFactorableError
        The reduced matrix has no positive eigenvalue at some iterate.

    Warns when ``max_iter`` is reached; the returned solution then carries
    ``converged=False``.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if max_iter < 1:
        raise ValidationError("max_iter must be at least 1")
    R = np.asarray(R, dtype=float)
    R = (R + R.T) / 2
    h = initial_communalities(R)

    converged = False
    iterations = 0
    loadings = np.zeros_like(h)
    top = 0.0
    for iterations in range(1, max_iter + 1):
        reduced = R.copy()
        np.fill_diagonal(reduced, h)
        eigvals, eigvecs = np.linalg.eigh(reduced)
        top = eigvals[-1]
        if not top > 0:
            raise NotFactorableError(
                f"no common factor: leading eigenvalue {top:.3g} of the reduced matrix is not positive"
            )
        loadings = np.sqrt(top) * eigvecs[:, -1]
        h_new = loadings**2
        delta = np.max(np.abs(h_new - h))
        h = h_new
        if delta < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"principal axis factoring did not converge in {max_iter} iterations", stacklevel=2)

    if loadings.sum() < 0:
        loadings = -loadings
    communalities = loadings**2
    if np.any(communalities > 1):
        warnings.warn("Heywood case: a communality exceeds 1", stacklevel=2)
    return FactorSolution(
        loadings=loadings,
        communalities=communalities,
        weights=weights(communalities),
        iterations=iterations,
        converged=converged,
        tolerance=tol,
        eigenvalue=float(top),
    )


def weights(solution):
    """Communalities rescaled to sum to one.

    Accepts a FactorSolution or a plain communality vector.
    """
    h = np.asarray(getattr(solution, "communalities", solution), dtype=float)
    if np.any(h < 0):
        raise ValidationError("communalities must be non-negative")
    total = h.sum()
    if not total > 0:
        raise NotFactorableError("all communalities are zero; no weights can be formed")
    return h / total


def compute_ssi(X, w):
    """Slum severity index of every block: attribute rows dotted with weights ``w``."""
    values = np.asarray(getattr(X, "values", X), dtype=float)
    w = np.asarray(w, dtype=float)
    if values.ndim != 2 or w.ndim != 1 or values.shape[1] != w.shape[0]:
        raise ValidationError(f"dimension mismatch: attributes {values.shape}, weights {w.shape}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValidationError("weights must be non-negative and sum to 1")
    ssi = np.clip(values @ w, 0.0, 1.0)
    block_ids = list(getattr(X, "block_ids", range(len(values))))
    return SsiVector(block_ids, ssi)


# ---------------------------------------------------------------------------
# distribution shape


def silverman_bandwidth(x):
    x = np.asarray(x, dtype=float)
    if np.ptp(x) == 0:
        # point mass: any positive width keeps the single peak in place
        return 0.9 * 0.01 * len(x) ** -0.2
    sd = x.std(ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return 0.9 * spread * len(x) ** -0.2


def kde(x, bandwidth, grid=1001):
    """Gaussian kernel density of ``x`` on a uniform grid over [0, 1]."""
    x = np.asarray(x, dtype=float)
    points = np.linspace(0.0, 1.0, grid)
    density = np.zeros(grid)
    # chunk the samples to bound memory at grid * chunk floats
    for start in range(0, len(x), 2048):
        z = (points[:, None] - x[None, start:start + 2048]) / bandwidth
        density += np.exp(-0.5 * z * z).sum(axis=1)
    density /= len(x) * bandwidth * np.sqrt(2 * np.pi)
    return points, density


def find_modes(ssi, bandwidth=None, grid=1001):
    """
    Local maxima of the Gaussian KDE of SSI values on [0, 1].

    Returns ``(location, density)`` pairs, highest density first. An end of
    the grid counts as a peak when it is strictly above its neighbour.
    ``bandwidth`` defaults to Silverman's rule.
    """
    x = np.asarray(getattr(ssi, "values", ssi), dtype=float)
    if len(x) < 10:
        raise ValidationError(f"need at least 10 values for mode finding, got {len(x)}")
    if grid < 3:
        raise ValidationError("grid needs at least 3 points")
    if bandwidth is None:
        bandwidth = silverman_bandwidth(x)
    if not bandwidth > 0:
        raise ValidationError("bandwidth must be positive")
    points, density = kde(x, bandwidth, grid)

    left = np.r_[-np.inf, density[:-1]]
    right = np.r_[density[1:], -np.inf]
    # first point of a plateau wins; underflowed tails are never peaks
    is_peak = (density > left) & (density >= right) & (density > 0)
    idx = np.flatnonzero(is_peak)
    peaks = [(float(points[i]), float(density[i])) for i in idx]
    peaks.sort(key=lambda p: (-p[1], p[0]))
    return peaks


# ---------------------------------------------------------------------------
# files


def write_ssi(path, ssi):
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("block_id", "ssi"))
        for block_id, value in zip(ssi.block_ids, ssi.values):
            writer.writerow((block_id, fmt(value)))


def read_ssi(path):
    ids, values = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["block_id", "ssi"]:
            raise ValidationError(f"{path}: expected header block_id,ssi")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                values.append(float(row[1]))
            except (ValueError, IndexError):
                raise ValidationError(f"{path}:{lineno}: bad SSI value") from None
            ids.append(row[0])
    return SsiVector(ids, np.array(values))
