"""
Census block tables: parsing, deprivation attributes and locality summaries.

Four deprivation attributes are derived per block, always in the column order
given by :data:`ATTRIBUTES`:

    sanitation    share of houses without sewage and toilet
    water         share of houses without piped water
    structural    share of houses with dirt floor and a single room
    overcrowding  persons per room, min-max rescaled over the dataset
"""

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._io import atomic_write, fmt, sha256_file
from .errors import ConfigError, RowError, ValidationError

ATTRIBUTES = ("sanitation", "water", "structural", "overcrowding")

BLOCK_FIELDS = (
    "block_id",
    "locality_id",
    "year",
    "houses_total",
    "houses_no_water",
    "houses_dirt_floor_or_single_room",
    "houses_no_sanitation",
    "occupants_total",
    "rooms_total",
)

_COUNT_FIELDS = BLOCK_FIELDS[3:]
_DEPRIVATION_FIELDS = (
    "houses_no_water",
    "houses_dirt_floor_or_single_room",
    "houses_no_sanitation",
)


@dataclass(frozen=True)
class BlockRecord:
    block_id: str
    locality_id: str
    year: int
    houses_total: int
    houses_no_water: int
    houses_dirt_floor_or_single_room: int
    houses_no_sanitation: int
    occupants_total: int
    rooms_total: int

    @property
    def flagged(self):
        """True for blocks with no houses; these cannot enter attribute derivation."""
        return self.houses_total == 0

    @property
    def density(self):
        """Persons per room, or ``nan`` when the block reports no rooms."""
        if self.rooms_total == 0:
            return float("nan")
        return self.occupants_total / self.rooms_total

    def validate(self, row_number=None):
        for name in _COUNT_FIELDS:
            if getattr(self, name) < 0:
                raise RowError(row_number, f"{name} is negative")
        for name in _DEPRIVATION_FIELDS:
            if getattr(self, name) > self.houses_total:
                raise RowError(
                    row_number,
                    f"{name}={getattr(self, name)} exceeds houses_total={self.houses_total}",
                )


@dataclass
class AttributeMatrix:
    """n x 4 deprivation attributes in [0, 1], one row per block."""

    block_ids: list
    values: np.ndarray
    normalization_params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != len(ATTRIBUTES):
            raise ValidationError(
                f"attribute matrix must be n x {len(ATTRIBUTES)}, got {self.values.shape}"
            )
        if len(self.block_ids) != self.values.shape[0]:
            raise ValidationError("block_ids and attribute rows differ in length")

    def __len__(self):
        return len(self.block_ids)


# ---------------------------------------------------------------------------
# configuration


def read_column_map(path):
    """Read a ``field = column`` configuration file.

    Blank lines and ``#`` comments are ignored. The optional key
    ``delimiter`` sets the census delimiter (``\\t`` and ``tab`` are accepted
    for tabs). Returns ``(column_map, delimiter)``.
    """
    column_map = {}
    delimiter = ","
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key == "delimiter":
                delimiter = "\t" if value in ("\\t", "tab") else value
                if len(delimiter) != 1:
                    raise ConfigError(f"{path}:{lineno}: delimiter must be one character")
            elif key in BLOCK_FIELDS:
                column_map[key] = value
            else:
                raise ConfigError(f"{path}:{lineno}: unknown field {key!r}")
    return column_map, delimiter


def write_column_map(path, column_map, delimiter=","):
    with atomic_write(path) as fh:
        if delimiter != ",":
            fh.write(f"delimiter = {'tab' if delimiter == chr(9) else delimiter}\n")
        for name in BLOCK_FIELDS:
            fh.write(f"{name} = {column_map.get(name, name)}\n")


# ---------------------------------------------------------------------------
# parsing


def _parse_count(text, name, row_number):
    try:
        value = int(text.strip())
    except (ValueError, AttributeError):
        raise RowError(row_number, f"{name}={text!r} is not an integer") from None
    if value < 0:
        raise RowError(row_number, f"{name}={value} is negative")
    return value


def parse_census(table_path, column_map=None, delimiter=","):
    """
    Parse a delimited census table into block records.

    Parameters
    ----------
    table_path : path-like
        UTF-8 delimited text with a header row.
    column_map : dict, optional
        Maps each :data:`BLOCK_FIELDS` name to a header column. Fields not
        listed are looked up under their own name.
    delimiter : str
        Field separator.

    Returns
    -------
    list of BlockRecord
        One record per data row, in file order. Rows with ``houses_total == 0``
        are kept; their ``flagged`` property is true.

    Raises
    ------
    ConfigError
        A mapped column is absent from the header.
    RowError
        A count is negative, non-integer, or a deprivation count exceeds
        ``houses_total``. The error carries the 1-based data row number.
    """
    column_map = dict(column_map or {})
    with open(table_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            warnings.warn(f"{table_path}: empty census file", stacklevel=2)
            return []
        header = [h.strip() for h in header]
        index = {}
        for name in BLOCK_FIELDS:
            column = column_map.get(name, name)
            if column not in header:
                raise ConfigError(f"column {column!r} (field {name}) not found in {table_path}")
            index[name] = header.index(column)

        records = []
        for row_number, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise RowError(row_number, f"expected {len(header)} fields, got {len(row)}")
            values = {
                "block_id": row[index["block_id"]].strip(),
                "locality_id": row[index["locality_id"]].strip(),
                "year": _parse_count(row[index["year"]], "year", row_number),
            }
            for name in _COUNT_FIELDS:
                values[name] = _parse_count(row[index[name]], name, row_number)
            record = BlockRecord(**values)
            record.validate(row_number)
            records.append(record)

    if not records:
        warnings.warn(f"{table_path}: no data rows", stacklevel=2)
    return records


# ---------------------------------------------------------------------------
# attributes


def derive_attributes(records, density_range=None):
    """
    Turn block records into the normalized attribute matrix.

    The three housing attributes are proportions of ``houses_total``. Density
    (occupants per room) is min-max rescaled; pass ``density_range=(lo, hi)``
    to reuse the scale of an earlier run, in which case values outside the
    range are clipped.

    Blocks with no houses or no rooms are dropped with a warning.
    """
    kept = []
    for rec in records:
        rec.validate()
        if rec.houses_total == 0:
            warnings.warn(f"block {rec.block_id}: houses_total=0, excluded", stacklevel=2)
        elif rec.rooms_total == 0:
            warnings.warn(f"block {rec.block_id}: rooms_total=0, density undefined, excluded", stacklevel=2)
        else:
            kept.append(rec)
    if len(kept) < 2:
        raise ValidationError(f"need at least 2 usable blocks, got {len(kept)}")

    houses = np.array([r.houses_total for r in kept], dtype=float)
    values = np.empty((len(kept), len(ATTRIBUTES)))
    values[:, 0] = [r.houses_no_sanitation for r in kept]
    values[:, 1] = [r.houses_no_water for r in kept]
    values[:, 2] = [r.houses_dirt_floor_or_single_room for r in kept]
    values[:, :3] /= houses[:, None]

    density = np.array([r.occupants_total / r.rooms_total for r in kept])
    if density_range is None:
        lo, hi = float(density.min()), float(density.max())
    else:
        lo, hi = (float(v) for v in density_range)
    if hi > lo:
        values[:, 3] = np.clip((density - lo) / (hi - lo), 0.0, 1.0)
    else:
        warnings.warn("overcrowding has zero range, column set to 0", stacklevel=2)
        values[:, 3] = 0.0

    params = {
        "overcrowding": {"min": lo, "max": hi},
        "sanitation": {"min": 0.0, "max": 1.0},
        "water": {"min": 0.0, "max": 1.0},
        "structural": {"min": 0.0, "max": 1.0},
    }
    return AttributeMatrix([r.block_id for r in kept], values, params)


def write_attributes(path, attrs, source=None):
    """Write ``block_id,<attributes>`` plus a ``.meta.json`` sidecar."""
    path = Path(path)
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("block_id",) + ATTRIBUTES)
        for block_id, row in zip(attrs.block_ids, attrs.values):
            writer.writerow([block_id] + [fmt(v) for v in row])
    meta = {
        "columns": list(ATTRIBUTES),
        "n_blocks": len(attrs),
        "normalization_params": attrs.normalization_params,
    }
    if source is not None:
        meta["source"] = Path(source).name
        meta["source_sha256"] = sha256_file(source)
    with atomic_write(metadata_path(path)) as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def metadata_path(path):
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def read_attributes(path):
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != ("block_id",) + ATTRIBUTES:
            raise ValidationError(f"{path}: expected header block_id,{','.join(ATTRIBUTES)}")
        ids, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                vals = [float(v) for v in row[1:]]
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric attribute") from None
            if len(vals) != len(ATTRIBUTES):
                raise ValidationError(f"{path}:{lineno}: expected {len(ATTRIBUTES)} attributes")
            ids.append(row[0])
            rows.append(vals)
    values = np.array(rows, dtype=float).reshape(-1, len(ATTRIBUTES))
    if np.any(~np.isfinite(values)) or np.any(values < 0) or np.any(values > 1):
        raise ValidationError(f"{path}: attribute values must lie in [0, 1]")
    params = {}
    meta = metadata_path(path)
    if meta.exists():
        with open(meta, encoding="utf-8") as fh:
            params = json.load(fh).get("normalization_params", {})
    return AttributeMatrix(ids, values, params)


# ---------------------------------------------------------------------------
# aggregation


@dataclass(frozen=True)
class LocalitySummary:
    locality_id: str
    count: int
    mean: float
    weighted_mean: float
    q1: float
    median: float
    q3: float
    minimum: float
    maximum: float


def aggregate_ssi(ssi, records, level="locality"):
    """
    Summarize block SSI values per locality.

    ``ssi`` is anything with ``block_ids`` and ``values`` (an SsiVector). The
    weighted mean uses ``houses_total`` as weights; when a locality has no
    houses at all it falls back to the plain mean.

    Returns a list of :class:`LocalitySummary` sorted by locality id.
    """
    if level != "locality":
        raise ValidationError(f"unsupported aggregation level {level!r}")
    by_block = {r.block_id: r for r in records}
    orphans = [b for b in ssi.block_ids if b not in by_block]
    if orphans:
        shown = ", ".join(orphans[:20]) + (" ..." if len(orphans) > 20 else "")
        raise ValidationError(f"{len(orphans)} blocks have no locality mapping: {shown}")

    groups = {}
    for block_id, value in zip(ssi.block_ids, ssi.values):
        rec = by_block[block_id]
        groups.setdefault(rec.locality_id, []).append((float(value), rec.houses_total))

    out = []
    for locality in sorted(groups):
        vals = np.array([v for v, _ in groups[locality]])
        w = np.array([h for _, h in groups[locality]], dtype=float)
        wmean = float(vals @ w / w.sum()) if w.sum() > 0 else float(vals.mean())
        q1, med, q3 = np.percentile(vals, [25, 50, 75])
        out.append(
            LocalitySummary(
                locality, len(vals), float(vals.mean()), wmean,
                float(q1), float(med), float(q3), float(vals.min()), float(vals.max()),
            )
        )
    return out


def write_summary(path, summaries):
    cols = ("locality_id", "count", "mean", "weighted_mean", "q1", "median", "q3", "min", "max")
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for s in summaries:
            writer.writerow(
                [s.locality_id, s.count]
                + [fmt(v) for v in (s.mean, s.weighted_mean, s.q1, s.median, s.q3, s.minimum, s.maximum)]
            )
