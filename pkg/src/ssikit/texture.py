"""
Grey-level co-occurrence texture features over sliding windows.

Rasters are 2-D integer numpy arrays (row-major, rows = y). A GLCM here is
always the symmetric, normalized matrix ``(C + C.T) / (2 N)`` where ``C``
counts the ``N`` in-bounds ordered pixel pairs ``(p, p + offset)`` of a patch.

The windowed engine slides a W x W window along each row and updates pair
counts incrementally: integer moment sums stay exact and only the entropy
term is accumulated in floating point. Rows are independent, so the work can
be split across threads without changing a single output bit.
"""

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass

import numba
import numpy as np

from ._io import atomic_write, fmt
from .errors import ValidationError

FEATURE_NAMES = ("uniformity", "entropy", "contrast", "idm", "variance", "covariance", "correlation")

# 0, 45, 90 and 135 degrees at distance one, as (drow, dcol)
FOUR_ORIENTATIONS = ((0, 1), (-1, 1), (-1, 0), (-1, -1))
SHIFT11 = ((1, 1),)
OFFSET_MODES = {"four-orientations": FOUR_ORIENTATIONS, "shift11": SHIFT11}

DEFAULT_WINDOW = 21
DEFAULT_LEVELS = 32
DEGENERATE_SIGMA = 1e-12


@dataclass(frozen=True)
class GlcmFeatures:
    uniformity: float
    entropy: float
    contrast: float
    inverse_difference_moment: float
    variance: float
    covariance: float
    correlation: float

    def as_array(self):
        return np.array(astuple(self))

    @classmethod
    def from_array(cls, values):
        return cls(*(float(v) for v in values))


def quantize(raster, levels=DEFAULT_LEVELS):
    """Map intensities linearly onto ``0 .. levels-1``.

    Uses ``floor((v - min) * levels / (max - min + 1))`` in integer
    arithmetic; a constant raster maps to all zeros.
    """
    raster = np.asarray(raster)
    if levels < 2:
        raise ValidationError("levels must be at least 2")
    if raster.size == 0:
        raise ValidationError("raster is empty")
    if not np.issubdtype(raster.dtype, np.integer):
        raise ValidationError("raster must hold integer intensities")
    r = raster.astype(np.int64)
    lo = r.min()
    span = int(r.max() - lo) + 1
    return ((r - lo) * levels // span).astype(np.int32)


def glcm_for_patch(patch, offset, levels=None):
    """Symmetric normalized co-occurrence matrix of a quantized patch."""
    patch = np.asarray(patch)
    if levels is None:
        levels = int(patch.max()) + 1
    dr, dc = offset
    h, w = patch.shape
    r0, r1 = max(0, -dr), min(h, h - dr)
    c0, c1 = max(0, -dc), min(w, w - dc)
    if r1 <= r0 or c1 <= c0:
        raise ValidationError(f"patch {patch.shape} has no pixel pair at offset {offset}")
    a = patch[r0:r1, c0:c1].ravel().astype(np.int64)
    b = patch[r0 + dr:r1 + dr, c0 + dc:c1 + dc].ravel().astype(np.int64)
    if a.max() >= levels or b.max() >= levels or min(a.min(), b.min()) < 0:
        raise ValidationError(f"patch values must lie in [0, {levels})")
    counts = np.bincount(a * levels + b, minlength=levels * levels).reshape(levels, levels)
    sym = (counts + counts.T).astype(float)
    return sym / sym.sum()


def features(glcm):
    """Haralick-style statistics of one normalized GLCM."""
    P = np.asarray(glcm, dtype=float)
    G = P.shape[0]
    i, j = np.indices((G, G), dtype=float)
    px = P.sum(axis=1)
    py = P.sum(axis=0)
    levels = np.arange(G, dtype=float)
    mu_x = levels @ px
    mu_y = levels @ py
    var_x = ((levels - mu_x) ** 2) @ px
    var_y = ((levels - mu_y) ** 2) @ py
    cov = ((i - mu_x) * (j - mu_y) * P).sum()
    nz = P[P > 0]
    sigma = np.sqrt(var_x * var_y)
    return GlcmFeatures(
        uniformity=float((P**2).sum()),
        entropy=float(-(nz * np.log(nz)).sum()),
        contrast=float(((i - j) ** 2 * P).sum()),
        inverse_difference_moment=float((P / (1.0 + (i - j) ** 2)).sum()),
        variance=float(var_x),
        covariance=float(cov),
        correlation=float(cov / sigma) if sigma >= DEGENERATE_SIGMA else 0.0,
    )


# ---------------------------------------------------------------------------
# windowed engine


@numba.njit(nogil=True, cache=True)
def _add_pair(S, a, b, sign, state, diff):
    # state holds exact integer sums [sum S^2, sum(a+b), sum(a^2+b^2), sum ab, sum (a-b)^2]
    if a == b:
        s = S[a, a]
        t = s + 2 * sign
        S[a, a] = t
        state[0] += t * t - s * s
    else:
        s = S[a, b]
        t = s + sign
        S[a, b] = t
        S[b, a] = t
        state[0] += 2 * (t * t - s * s)
    state[1] += sign * (a + b)
    state[2] += sign * (a * a + b * b)
    state[3] += sign * a * b
    d = a - b
    state[4] += sign * d * d
    if d < 0:
        d = -d
    diff[d] += sign
    return s, t


@numba.njit(nogil=True, cache=True)
def _window_rows(q, levels, half, dr, dc, row_start, row_stop, out):
    """Features for center rows ``row_start:row_stop`` at one offset.

    ``out`` has shape (n_rows, n_cols, 7) indexed relative to the first
    valid center (half, half).
    """
    H, W = q.shape
    n_cols = W - 2 * half
    win = 2 * half + 1
    n_pairs = (win - abs(dr)) * (win - abs(dc))
    mass = 2 * n_pairs
    xlnx = np.zeros(mass + 1)
    for s in range(1, mass + 1):
        xlnx[s] = s * np.log(s)
    inv_idm = np.empty(levels)
    for d in range(levels):
        inv_idm[d] = 1.0 / (1.0 + d * d)
    log_mass = np.log(mass)
    m2 = float(mass) * float(mass)

    S = np.zeros((levels, levels), dtype=np.int64)
    diff = np.zeros(levels, dtype=np.int64)
    state = np.zeros(5, dtype=np.int64)

    ymin_off = -min(0, dr)
    ymax_off = max(0, dr)
    xmin_off = -min(0, dc)
    xmax_off = max(0, dc)

    for r in range(row_start, row_stop):
        S[:, :] = 0
        diff[:] = 0
        state[:] = 0
        slns = 0.0
        y_lo = r - half + ymin_off
        y_hi = r + half - ymax_off  # inclusive
        c = half
        x_lo = c - half + xmin_off
        x_hi = c + half - xmax_off
        for y in range(y_lo, y_hi + 1):
            for x in range(x_lo, x_hi + 1):
                s, t = _add_pair(S, q[y, x], q[y + dr, x + dc], 1, state, diff)
                if q[y, x] == q[y + dr, x + dc]:
                    slns += xlnx[t] - xlnx[s]
                else:
                    slns += 2.0 * (xlnx[t] - xlnx[s])
        for k in range(n_cols):
            c = half + k
            if k > 0:
                x_old = c - 1 - half + xmin_off
                x_new = c + half - xmax_off
                for y in range(y_lo, y_hi + 1):
                    a = q[y, x_old]
                    b = q[y + dr, x_old + dc]
                    s, t = _add_pair(S, a, b, -1, state, diff)
                    if a == b:
                        slns += xlnx[t] - xlnx[s]
                    else:
                        slns += 2.0 * (xlnx[t] - xlnx[s])
                    a = q[y, x_new]
                    b = q[y + dr, x_new + dc]
                    s, t = _add_pair(S, a, b, 1, state, diff)
                    if a == b:
                        slns += xlnx[t] - xlnx[s]
                    else:
                        slns += 2.0 * (xlnx[t] - xlnx[s])
            sq, a1, a2, ab, con = state[0], state[1], state[2], state[3], state[4]
            idm = 0.0
            for d in range(levels):
                if diff[d] != 0:
                    idm += diff[d] * inv_idm[d]
            var_num = a2 * mass - a1 * a1
            cov_num = 2 * ab * mass - a1 * a1
            var = var_num / m2
            cov = cov_num / m2
            o = out[r - row_start, k]
            o[0] = sq / m2
            o[1] = log_mass - slns / mass
            o[2] = con / n_pairs
            o[3] = idm / n_pairs
            o[4] = var
            o[5] = cov
            o[6] = cov / var if var >= 1e-12 else 0.0
    return out


def resolve_threads(threads=None):
    """Thread count from the argument, else ``SSIKIT_THREADS``, else 1."""
    if threads is None:
        threads = os.environ.get("SSIKIT_THREADS", "1")
    try:
        threads = int(threads)
    except ValueError:
        raise ValidationError(f"thread count must be an integer, got {threads!r}") from None
    if threads < 1:
        raise ValidationError("thread count must be at least 1")
    return threads


def window_features(raster, window=DEFAULT_WINDOW, levels=DEFAULT_LEVELS, offsets=FOUR_ORIENTATIONS,
                    threads=1, quantized=False):
    """
    Orientation-averaged GLCM features for every window center.

    Parameters
    ----------
    raster : 2-D integer array
        Raw intensities, or already-quantized levels with ``quantized=True``.
    window : int
        Odd window side length.
    levels : int
        Number of grey levels after quantization.
    offsets : sequence of (drow, dcol)
        Pair offsets; features are computed per offset and averaged.
    threads : int
        Worker threads. Output is bit-identical for any thread count.

    Returns
    -------
    numpy.ndarray
        Shape ``(height, width, 7)`` in :data:`FEATURE_NAMES` order. Centers
        whose window does not fit inside the raster are ``nan``.
    """
    raster = np.asarray(raster)
    if raster.ndim != 2:
        raise ValidationError("raster must be 2-D")
    if window < 1 or window % 2 == 0:
        raise ValidationError(f"window must be odd, got {window}")
    H, W = raster.shape
    if window > min(H, W):
        raise ValidationError(f"raster {W}x{H} is smaller than the {window}x{window} window")
    for dr, dc in offsets:
        if abs(dr) >= window or abs(dc) >= window:
            raise ValidationError(f"offset {(dr, dc)} does not fit a {window}-pixel window")
    if quantized:
        q = np.ascontiguousarray(raster, dtype=np.int64)
        if q.min() < 0 or q.max() >= levels:
            raise ValidationError(f"quantized raster must lie in [0, {levels})")
    else:
        q = quantize(raster, levels).astype(np.int64)

    half = window // 2
    n_rows, n_cols = H - 2 * half, W - 2 * half
    threads = resolve_threads(threads)
    total = np.zeros((n_rows, n_cols, len(FEATURE_NAMES)))

    for dr, dc in offsets:
        part = np.empty_like(total)
        if threads == 1:
            _window_rows(q, levels, half, dr, dc, half, half + n_rows, part)
        else:
            bounds = np.linspace(0, n_rows, threads + 1).astype(int)

            def run(i, dr=dr, dc=dc, part=part):
                lo, hi = bounds[i], bounds[i + 1]
                if hi > lo:
                    _window_rows(q, levels, half, dr, dc, half + lo, half + hi, part[lo:hi])

            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(run, range(threads)))
        total += part
    total /= len(offsets)

    grid = np.full((H, W, len(FEATURE_NAMES)), np.nan)
    grid[half:H - half, half:W - half] = total
    return grid


def naive_window_features(raster, window=DEFAULT_WINDOW, levels=DEFAULT_LEVELS, offsets=FOUR_ORIENTATIONS,
                          quantized=False):
    """Recompute every window from scratch with :func:`glcm_for_patch`; slow reference path."""
    raster = np.asarray(raster)
    q = np.asarray(raster, dtype=np.int64) if quantized else quantize(raster, levels)
    H, W = q.shape
    half = window // 2
    grid = np.full((H, W, len(FEATURE_NAMES)), np.nan)
    for r in range(half, H - half):
        for c in range(half, W - half):
            patch = q[r - half:r + half + 1, c - half:c + half + 1]
            vecs = [features(glcm_for_patch(patch, off, levels)).as_array() for off in offsets]
            grid[r, c] = np.mean(vecs, axis=0)
    return grid


@dataclass
class BlockTexture:
    label: int
    n_windows: int
    features: GlcmFeatures = None

    @property
    def missing(self):
        return self.n_windows == 0


def block_texture(raster, mask, window=DEFAULT_WINDOW, levels=DEFAULT_LEVELS, offsets=FOUR_ORIENTATIONS,
                  threads=1, exclude_straddling=False, grid=None):
    """
    Mean window features per labelled block.

    A window center contributes to the block whose label sits under it. With
    ``exclude_straddling=True`` a window only counts when every pixel in it
    carries that same label. Blocks without a contributing center come back
    with ``n_windows == 0`` and ``features is None``.

    Returns a dict ``label -> BlockTexture`` for every non-zero label in the
    mask, sorted by label.
    """
    raster = np.asarray(raster)
    mask = np.asarray(mask)
    if raster.shape != mask.shape:
        raise ValidationError(f"mask shape {mask.shape} differs from raster shape {raster.shape}")
    if grid is None:
        grid = window_features(raster, window, levels, offsets, threads)

    labels = mask.astype(np.int64)
    valid = ~np.isnan(grid[..., 0]) & (labels > 0)
    if exclude_straddling:
        valid &= _uniform_windows(labels, window)

    all_labels = np.unique(labels[labels > 0])
    n_label = int(all_labels.max()) + 1 if all_labels.size else 1
    picked = labels[valid]
    counts = np.bincount(picked, minlength=n_label)
    if counts.sum() == 0:
        raise ValidationError("no block has a complete window center")
    sums = np.stack(
        [np.bincount(picked, weights=grid[..., f][valid], minlength=n_label) for f in range(grid.shape[-1])],
        axis=1,
    )
    out = {}
    for label in all_labels.tolist():
        n = int(counts[label])
        feats = GlcmFeatures.from_array(sums[label] / n) if n else None
        out[label] = BlockTexture(label, n, feats)
    return out


def _uniform_windows(labels, window):
    """True where the window centred on a pixel holds a single label."""
    half = window // 2
    H, W = labels.shape
    ok = np.zeros((H, W), dtype=bool)
    if H < window or W < window:
        return ok
    v = np.lib.stride_tricks.sliding_window_view(labels, (window, window))
    center = labels[half:H - half, half:W - half]
    ok[half:H - half, half:W - half] = (v.min(axis=(2, 3)) == center) & (v.max(axis=(2, 3)) == center)
    return ok


# ---------------------------------------------------------------------------
# files


def read_label_map(path):
    """Read the ``label,block_id`` sidecar of a block mask."""
    mapping = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["label", "block_id"]:
            raise ValidationError(f"{path}: expected header label,block_id")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                label = int(row[0])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: label must be an integer") from None
            if label <= 0:
                raise ValidationError(f"{path}:{lineno}: label 0 is reserved for unassigned pixels")
            mapping[label] = row[1].strip()
    return mapping


def write_label_map(path, mapping):
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("label", "block_id"))
        for label in sorted(mapping):
            writer.writerow((label, mapping[label]))


def write_block_features(path, blocks, label_map=None):
    """Write ``block_id,<features>,n_windows``; missing blocks get empty feature fields."""
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("block_id",) + FEATURE_NAMES + ("n_windows",))
        for label in sorted(blocks):
            bt = blocks[label]
            block_id = label_map.get(label, str(label)) if label_map else str(label)
            if bt.features is None:
                vals = [""] * len(FEATURE_NAMES)
            else:
                vals = [fmt(v) for v in astuple(bt.features)]
            writer.writerow([block_id] + vals + [bt.n_windows])


def read_block_features(path):
    """Return ``{block_id: {feature: value}}`` for blocks with at least one window."""
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "block_id" not in reader.fieldnames:
            raise ValidationError(f"{path}: expected a block_id column")
        for row in reader:
            if int(row.get("n_windows") or 0) == 0:
                continue
            out[row["block_id"]] = {name: float(row[name]) for name in FEATURE_NAMES}
    return out
