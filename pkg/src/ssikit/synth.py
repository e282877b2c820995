"""
Deterministic synthetic census tables and texture rasters with known structure.

All randomness comes from :func:`make_rng`, a Philox-4x64-10 counter-based
bit generator (as implemented by numpy) keyed by the user seed. The generator
name is recorded in every ground-truth file.
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import atomic_write, fmt
from .errors import ValidationError
from .ingest import ATTRIBUTES, BLOCK_FIELDS, BlockRecord, write_column_map

GENERATOR = "numpy Philox4x64-10"

# latent score mixture: (weight, mean, sd)
MIXTURE = ((0.7, 0.15, 0.05), (0.3, 0.60, 0.08))
NOISE_SD = 0.05
DENSITY_RANGE = (0.5, 4.5)
REFERENCE_LOADINGS = (0.72, 0.43, 0.84, 0.46)


def make_rng(seed):
    return np.random.Generator(np.random.Philox(int(seed)))


def sample_latent_scores(n, rng):
    """Draw ``n`` scores from the two-component normal mixture, clipped to [0, 1]."""
    weights = np.array([w for w, _, _ in MIXTURE])
    comp = rng.choice(len(MIXTURE), size=n, p=weights)
    means = np.array([m for _, m, _ in MIXTURE])[comp]
    sds = np.array([s for _, _, s in MIXTURE])[comp]
    return np.clip(means + sds * rng.standard_normal(n), 0.0, 1.0)


def mixture_variance():
    mean = sum(w * m for w, m, _ in MIXTURE)
    return sum(w * (s * s + m * m) for w, m, s in MIXTURE) - mean * mean


def implied_loadings(loadings, noise_sd=NOISE_SD):
    """Loadings the generator actually plants once the factor variance is accounted for.

    An attribute ``l*f + sqrt(1-l^2)*e`` with ``var(f) = v`` and
    ``var(e) = noise_sd^2`` correlates with ``f`` at
    ``l*sqrt(v) / sqrt(l^2 v + (1-l^2) noise_sd^2)``. Clipping is ignored.
    """
    lam = np.asarray(loadings, dtype=float)
    v = mixture_variance()
    return lam * math.sqrt(v) / np.sqrt(lam**2 * v + (1 - lam**2) * noise_sd**2)


def implied_correlation(loadings, noise_sd=NOISE_SD):
    lam = implied_loadings(loadings, noise_sd)
    R = np.outer(lam, lam)
    np.fill_diagonal(R, 1.0)
    return R


@dataclass
class SyntheticCensus:
    records: list
    scores: np.ndarray
    attributes: np.ndarray
    loadings: np.ndarray
    noise_sd: float
    seed: int


def generate_census(n, loadings=REFERENCE_LOADINGS, seed=0, noise_sd=NOISE_SD, year=2010, blocks_per_locality=50):
    """
    Census records with a planted one-factor structure.

    Each block gets a latent score ``f`` from the mixture and attributes
    ``clip(l_j*f + sqrt(1-l_j^2)*e_j, 0, 1)`` with ``e_j ~ N(0, noise_sd^2)``,
    in :data:`ssikit.ingest.ATTRIBUTES` order. The three housing attributes
    become deprived-house counts out of ``houses_total ~ U{50..500}``;
    overcrowding becomes occupants over rooms within :data:`DENSITY_RANGE`.
    """
    lam = np.asarray(loadings, dtype=float)
    if lam.shape != (len(ATTRIBUTES),) or np.any(lam <= 0) or np.any(lam >= 1):
        raise ValidationError("loadings must be 4 values strictly inside (0, 1)")
    if n < 1:
        raise ValidationError("n must be positive")
    if noise_sd < 0:
        raise ValidationError("noise_sd must be non-negative")

    rng = make_rng(seed)
    f = sample_latent_scores(n, rng)
    eps = noise_sd * rng.standard_normal((n, len(ATTRIBUTES)))
    attrs = np.clip(f[:, None] * lam + np.sqrt(1 - lam**2) * eps, 0.0, 1.0)
    houses = rng.integers(50, 501, size=n)
    rooms = houses * 2 + rng.integers(0, houses + 1)
    lo, hi = DENSITY_RANGE
    occupants = np.rint((lo + attrs[:, 3] * (hi - lo)) * rooms).astype(np.int64)
    deprived = np.rint(attrs[:, :3] * houses[:, None]).astype(np.int64)

    width = max(5, len(str(n)))
    records = []
    for i in range(n):
        records.append(
            BlockRecord(
                block_id=f"B{i + 1:0{width}d}",
                locality_id=f"L{i // blocks_per_locality + 1:03d}",
                year=year,
                houses_total=int(houses[i]),
                houses_no_water=int(deprived[i, 1]),
                houses_dirt_floor_or_single_room=int(deprived[i, 2]),
                houses_no_sanitation=int(deprived[i, 0]),
                occupants_total=int(occupants[i]),
                rooms_total=int(rooms[i]),
            )
        )
    return SyntheticCensus(records, f, attrs, lam, noise_sd, seed)


def write_census(path, records, delimiter=","):
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(BLOCK_FIELDS)
        for r in records:
            writer.writerow([getattr(r, name) for name in BLOCK_FIELDS])


# ---------------------------------------------------------------------------
# rasters


@dataclass(frozen=True)
class GridLayout:
    """Blocks drawn as equal rectangular tiles, row by row, on a fixed canvas."""

    rows: int
    cols: int
    height: int
    width: int

    @classmethod
    def square(cls, n_blocks, size=512):
        cols = math.ceil(math.sqrt(n_blocks))
        rows = math.ceil(n_blocks / cols)
        return cls(rows, cols, size, size)

    @property
    def tile(self):
        return self.height // self.rows, self.width // self.cols


def generate_raster(ssi, layout, seed=0, amplitude=200, base=128, cell=2, noise_sd=3.0):
    """
    Paint one tile per block whose texture contrast falls as its SSI rises.

    A block with score ``s`` is a checkerboard of ``cell``-pixel squares at
    ``base +/- amplitude*(1-s)/2`` plus Gaussian noise, so deprived blocks look
    flat and formal ones look busy. Returns ``(raster, mask, params)``: an
    8-bit raster, a label mask (block ``i`` gets label ``i+1``, 0 elsewhere),
    and per-block texture parameters.
    """
    values = np.asarray(getattr(ssi, "values", ssi), dtype=float)
    n = len(values)
    if n > layout.rows * layout.cols:
        raise ValidationError(f"{n} blocks do not fit a {layout.rows}x{layout.cols} grid")
    th, tw = layout.tile
    if th < 1 or tw < 1:
        raise ValidationError("tiles are smaller than one pixel")
    if np.any(values < 0) or np.any(values > 1):
        raise ValidationError("SSI values must lie in [0, 1]")

    rng = make_rng(seed)
    raster = np.full((layout.height, layout.width), float(base))
    mask = np.zeros((layout.height, layout.width), dtype=np.uint16)
    yy, xx = np.indices((th, tw))
    checker = np.where(((yy // cell) + (xx // cell)) % 2 == 0, 1.0, -1.0)
    params = []
    for i, s in enumerate(values):
        r, c = divmod(i, layout.cols)
        amp = amplitude * (1.0 - s)
        tile = base + checker * amp / 2 + noise_sd * rng.standard_normal((th, tw))
        raster[r * th:(r + 1) * th, c * tw:(c + 1) * tw] = tile
        mask[r * th:(r + 1) * th, c * tw:(c + 1) * tw] = i + 1
        params.append({"label": i + 1, "amplitude": amp, "row": r, "col": c})
    raster = np.clip(np.rint(raster), 0, 255).astype(np.uint8)
    return raster, mask, params


# ---------------------------------------------------------------------------
# bundle


def write_bundle(out_dir, n_blocks, seed=0, with_raster=False, raster_size=512, loadings=REFERENCE_LOADINGS,
                 noise_sd=NOISE_SD):
    """
    Write a complete synthetic input set into ``out_dir``.

    Files: ``census.csv``, ``census.cfg`` (column map), ``truth.json`` and,
    with ``with_raster``, ``raster.pgm``, ``mask.pgm`` and ``mask.labels.csv``.
    The raster paints the planted latent scores. Returns the paths written.
    """
    from .pgm import write_pgm
    from .texture import write_label_map

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    census = generate_census(n_blocks, loadings, seed, noise_sd)
    paths = {"census": out / "census.csv", "config": out / "census.cfg", "truth": out / "truth.json"}
    write_census(paths["census"], census.records)
    write_column_map(paths["config"], {name: name for name in BLOCK_FIELDS})

    truth = {
        "generator": GENERATOR,
        "seed": int(seed),
        "n_blocks": n_blocks,
        "attributes": list(ATTRIBUTES),
        "loadings": [float(v) for v in census.loadings],
        "implied_loadings": [float(v) for v in implied_loadings(census.loadings, noise_sd)],
        "noise_sd": noise_sd,
        "mixture": [list(m) for m in MIXTURE],
        "scores": {r.block_id: fmt(s) for r, s in zip(census.records, census.scores)},
    }
    if with_raster:
        layout = GridLayout.square(n_blocks, raster_size)
        # raster noise uses its own stream so the census is unchanged by --with-raster
        raster, mask, params = generate_raster(census.scores, layout, seed=seed + 1)
        paths.update(raster=out / "raster.pgm", mask=out / "mask.pgm", labels=out / "mask.labels.csv")
        write_pgm(paths["raster"], raster, maxval=255)
        write_pgm(paths["mask"], mask, maxval=65535)
        label_map = {p["label"]: r.block_id for p, r in zip(params, census.records)}
        write_label_map(paths["labels"], label_map)
        truth["raster"] = {
            "size": raster_size,
            "layout": {"rows": layout.rows, "cols": layout.cols, "tile": list(layout.tile)},
            "blocks": {
                label_map[p["label"]]: {"label": p["label"], "amplitude": fmt(p["amplitude"])} for p in params
            },
        }
    with atomic_write(paths["truth"]) as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
