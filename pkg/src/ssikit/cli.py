"""Command-line entry point: ``ssikit <subcommand> ...``.

Exit codes: 0 success, 1 invalid input or configuration, 2 I/O failure.
"""

import argparse
import csv
import json
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_write, fmt
from .errors import NotFactorableError, SsiError, ValidationError
from .ingest import ATTRIBUTES

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _need(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    return path


def _sidecar(path, suffix=".json"):
    path = Path(path)
    return path.with_suffix(suffix) if path.suffix else path.with_name(path.name + suffix)


def _write_report(path, title, sections):
    """Plain-text ``key=value`` report; the timestamp lives only in the header."""
    stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    with atomic_write(path) as fh:
        fh.write(f"# ssikit {title} report\n# version={__version__}\n# generated={stamp}\n")
        for name, items in sections.items():
            fh.write(f"\n[{name}]\n")
            for key, value in items.items():
                if isinstance(value, bool):
                    value = str(value).lower()
                elif isinstance(value, (int, float, np.floating, np.integer)):
                    value = fmt(value)
                fh.write(f"{key}={value}\n")


def _write_json(path, data):
    with atomic_write(path) as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args):
    from .ingest import derive_attributes, parse_census, read_column_map, write_attributes

    census = _need(args.census)
    column_map, delimiter = read_column_map(_need(args.config))
    density_range = None
    if args.density_range_from:
        with open(_need(args.density_range_from), encoding="utf-8") as fh:
            try:
                params = json.load(fh)["normalization_params"]["overcrowding"]
                density_range = (float(params["min"]), float(params["max"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                raise ValidationError(f"{args.density_range_from}: no overcrowding range recorded") from None
    records = parse_census(census, column_map, delimiter)
    attrs = derive_attributes(records, density_range)
    write_attributes(args.output, attrs, source=census)
    print(f"{len(attrs)} blocks -> {args.output}")


def _fixed_weights(spec):
    path = _need(spec)
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError:
            raise ValidationError(f"{path}: weights file must be JSON") from None
    w = data.get("weights", data)
    try:
        vec = np.array([float(w[name]) for name in ATTRIBUTES])
    except (KeyError, TypeError):
        raise ValidationError(f"{path}: needs a weight for each of {', '.join(ATTRIBUTES)}") from None
    if np.any(vec < 0) or not vec.sum() > 0:
        raise ValidationError(f"{path}: weights must be non-negative with a positive sum")
    return vec / vec.sum()


def cmd_efa(args):
    from .efa import compute_ssi, principal_axis_factor, write_ssi
    from .ingest import read_attributes
    from .stats import KMO_THRESHOLD, correlation_matrix, kmo

    attrs = read_attributes(_need(args.attributes))
    fixed = None
    if args.weights != "fit":
        if not args.weights.startswith("fixed:"):
            raise ValidationError("--weights must be 'fit' or 'fixed:<file>'")
        fixed = _fixed_weights(args.weights[len("fixed:"):])

    R = correlation_matrix(attrs)
    kmo_value, msa = kmo(R, return_msa=True)
    factorable = kmo_value >= KMO_THRESHOLD
    solution = None
    if fixed is None:
        if not factorable and not args.force:
            raise NotFactorableError(
                f"KMO={kmo_value:.3f} is below {KMO_THRESHOLD}; data are not factorable (use --force to override)"
            )
        solution = principal_axis_factor(R, tol=args.tol, max_iter=args.max_iter)
        w = solution.weights
    else:
        w = fixed
    ssi = compute_ssi(attrs, w)

    adequacy = {"kmo": kmo_value, "verdict": "factorable" if factorable else "not factorable",
                "threshold": KMO_THRESHOLD, "n_observations": len(attrs)}
    adequacy.update({f"msa.{a}": m for a, m in zip(ATTRIBUTES, msa)})
    sections = {"input": {"attributes": Path(args.attributes).name, "n_blocks": len(attrs)},
                "adequacy": adequacy}
    structured = {"attributes": list(ATTRIBUTES), "kmo": float(kmo_value), "verdict": adequacy["verdict"],
                  "msa": dict(zip(ATTRIBUTES, map(float, msa))),
                  "correlations": R.tolist(), "weights": dict(zip(ATTRIBUTES, map(float, w)))}
    if solution is not None:
        sections["solution"] = {"method": "principal-axis", "weights_source": "fit",
                                "converged": solution.converged, "iterations": solution.iterations,
                                "tolerance": solution.tolerance, "eigenvalue": solution.eigenvalue}
        sections["loadings"] = dict(zip(ATTRIBUTES, solution.loadings))
        sections["communalities"] = dict(zip(ATTRIBUTES, solution.communalities))
        structured.update(method="principal-axis", converged=solution.converged,
                          iterations=solution.iterations, tolerance=solution.tolerance,
                          loadings=dict(zip(ATTRIBUTES, map(float, solution.loadings))),
                          communalities=dict(zip(ATTRIBUTES, map(float, solution.communalities))))
    else:
        sections["solution"] = {"weights_source": args.weights}
        structured["weights_source"] = args.weights
    sections["weights"] = dict(zip(ATTRIBUTES, w))
    sections["ssi"] = {"min": float(ssi.values.min()), "mean": float(ssi.values.mean()),
                       "max": float(ssi.values.max())}

    write_ssi(args.output, ssi)
    report = Path(args.report) if args.report else _sidecar(args.output, ".report.txt")
    _write_report(report, "efa", sections)
    _write_json(_sidecar(report, ".json"), structured)
    print(f"kmo={fmt(kmo_value)}, verdict={adequacy['verdict']}")
    if solution is not None:
        print(f"converged={str(solution.converged).lower()}, iterations={solution.iterations}")
    print(f"{len(ssi)} blocks -> {args.output}; report -> {report}")


def cmd_modes(args):
    from .efa import find_modes, kde, read_ssi, silverman_bandwidth

    ssi = read_ssi(_need(args.ssi))
    bw = args.bandwidth if args.bandwidth is not None else silverman_bandwidth(ssi.values)
    peaks = find_modes(ssi, bw, args.grid)
    points, density = kde(ssi.values, bw, args.grid)
    counts, edges = np.histogram(ssi.values, bins=args.bins, range=(0.0, 1.0))
    hist_density = counts / (len(ssi) * np.diff(edges))

    out = Path(args.output)
    with atomic_write(out, newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("rank", "location", "density"))
        for rank, (loc, dens) in enumerate(peaks, start=1):
            writer.writerow((rank, fmt(loc), fmt(dens)))
    with atomic_write(_sidecar(out, ".kde.csv"), newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("x", "density"))
        writer.writerows((fmt(x), fmt(d)) for x, d in zip(points, density))
    with atomic_write(_sidecar(out, ".hist.csv"), newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("bin_left", "bin_right", "count", "density"))
        for lo, hi, c, d in zip(edges[:-1], edges[1:], counts, hist_density):
            writer.writerow((fmt(lo), fmt(hi), int(c), fmt(d)))
    print(f"bandwidth={fmt(bw)}, peaks={len(peaks)}")
    for loc, dens in peaks:
        print(f"  location={fmt(loc)} density={fmt(dens)}")


def cmd_aggregate(args):
    from .efa import read_ssi
    from .ingest import aggregate_ssi, parse_census, read_column_map, write_summary

    ssi = read_ssi(_need(args.ssi))
    column_map, delimiter = read_column_map(_need(args.config))
    records = parse_census(_need(args.census), column_map, delimiter)
    summaries = aggregate_ssi(ssi, records, args.level)
    write_summary(args.output, summaries)
    print(f"{len(summaries)} localities -> {args.output}")


def cmd_glcm(args):
    from .pgm import read_pgm
    from .texture import OFFSET_MODES, block_texture, read_label_map, resolve_threads, write_block_features

    raster, _ = read_pgm(_need(args.raster))
    mask, _ = read_pgm(_need(args.mask))
    label_map = None
    labels_path = Path(args.labels) if args.labels else _sidecar(args.mask, ".labels.csv")
    if args.labels or labels_path.is_file():
        label_map = read_label_map(_need(labels_path))
    threads = resolve_threads(args.threads)
    blocks = block_texture(raster, mask, args.window, args.levels, OFFSET_MODES[args.mode],
                           threads=threads, exclude_straddling=args.exclude_straddling)
    missing = [label for label, b in blocks.items() if b.missing]
    if missing:
        warnings.warn(f"{len(missing)} blocks have no complete window and are reported as missing")
    write_block_features(args.output, blocks, label_map)
    print(f"{len(blocks) - len(missing)} blocks with features, {len(missing)} missing -> {args.output}")


def cmd_validate(args):
    from .efa import read_ssi
    from .stats import pearson
    from .texture import FEATURE_NAMES, read_block_features

    if args.feature not in FEATURE_NAMES:
        raise ValidationError(f"unknown feature {args.feature!r}; choose from {', '.join(FEATURE_NAMES)}")
    ssi = read_ssi(_need(args.ssi)).as_dict()
    feats = read_block_features(_need(args.features))
    common = [b for b in ssi if b in feats]
    if len(common) < 3:
        raise ValidationError(f"only {len(common)} blocks have both an SSI and texture features")
    x = [ssi[b] for b in common]
    y = [feats[b][args.feature] for b in common]
    r = pearson(x, y)
    result = {"feature": args.feature, "n_blocks": len(common), "pearson_r": r, "r_squared": r * r,
              "direction": "negative" if r < 0 else "positive",
              "ssi_without_features": len(ssi) - len(common)}
    if args.output:
        _write_report(args.output, "validate", {"validation": result})
    print(f"pearson_r={fmt(r)}, n_blocks={len(common)}, feature={args.feature}")


def cmd_kmeans(args):
    from .cluster import kmeans, write_clusters
    from .ingest import read_attributes

    attrs = read_attributes(_need(args.attributes))
    result = kmeans(attrs, args.k, args.seed, args.max_iter)
    write_clusters(args.output, attrs.block_ids, result)
    print(f"k={args.k}, iterations={result.iterations}, inertia={fmt(result.inertia)} -> {args.output}")


def cmd_synth(args):
    from .synth import write_bundle

    if args.blocks < 2:
        raise ValidationError("--blocks must be at least 2")
    paths = write_bundle(args.output, args.blocks, args.seed, args.with_raster, args.raster_size)
    for name, path in paths.items():
        print(f"{name}: {path}")


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="ssikit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="census table -> normalized attribute file")
    s.add_argument("census")
    s.add_argument("--config", required=True, help="key=value column map")
    s.add_argument("--density-range-from", metavar="META",
                   help="reuse the overcrowding scale recorded in an earlier .meta.json")
    s.add_argument("-o", "--output", default="attributes.csv")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("efa", help="factor solution, KMO report and SSI file")
    s.add_argument("attributes")
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--max-iter", type=int, default=200)
    s.add_argument("--weights", default="fit", help="'fit' or 'fixed:<report.json>'")
    s.add_argument("--force", action="store_true", help="fit even when KMO is below 0.6")
    s.add_argument("--report", help="text report path (default: <output>.report.txt)")
    s.add_argument("-o", "--output", default="ssi.csv")
    s.set_defaults(func=cmd_efa)

    s = sub.add_parser("modes", help="KDE peaks of the SSI distribution")
    s.add_argument("ssi")
    s.add_argument("--bandwidth", type=float, help="default: Silverman's rule")
    s.add_argument("--grid", type=int, default=1001)
    s.add_argument("--bins", type=int, default=50)
    s.add_argument("-o", "--output", default="modes.csv")
    s.set_defaults(func=cmd_modes)

    s = sub.add_parser("aggregate", help="per-locality SSI summary")
    s.add_argument("ssi")
    s.add_argument("census")
    s.add_argument("--config", required=True)
    s.add_argument("--level", choices=["locality"], default="locality")
    s.add_argument("-o", "--output", default="summary.csv")
    s.set_defaults(func=cmd_aggregate)

    s = sub.add_parser("glcm", help="per-block GLCM texture features")
    s.add_argument("raster")
    s.add_argument("mask")
    s.add_argument("--labels", help="label,block_id file (default: <mask>.labels.csv if present)")
    s.add_argument("--window", type=int, default=21)
    s.add_argument("--levels", type=int, default=32)
    s.add_argument("--mode", choices=["four-orientations", "shift11"], default="four-orientations")
    s.add_argument("--exclude-straddling", action="store_true",
                   help="only count windows lying wholly inside one block")
    s.add_argument("--threads", type=int, help="worker threads (default: $SSIKIT_THREADS or 1)")
    s.add_argument("-o", "--output", default="features.csv")
    s.set_defaults(func=cmd_glcm)

    s = sub.add_parser("validate", help="Pearson correlation of SSI against a texture feature")
    s.add_argument("ssi")
    s.add_argument("features")
    s.add_argument("--feature", default="variance")
    s.add_argument("-o", "--output", help="optional report file")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("kmeans", help="k-means baseline clusters")
    s.add_argument("attributes")
    s.add_argument("--k", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-iter", type=int, default=300)
    s.add_argument("-o", "--output", default="clusters.csv")
    s.set_defaults(func=cmd_kmeans)

    s = sub.add_parser("synth", help="write a synthetic census (and raster) bundle")
    s.add_argument("--blocks", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--with-raster", action="store_true")
    s.add_argument("--raster-size", type=int, default=512)
    s.add_argument("-o", "--output", default="synth")
    s.set_defaults(func=cmd_synth)
    return p


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"ssikit: warning: {message}", file=sys.stderr)


def main(argv=None):
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        warnings.showwarning = _show_warning
        try:
            args.func(args)
        except SsiError as exc:
            print(f"ssikit: error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        except OSError as exc:
            print(f"ssikit: I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
