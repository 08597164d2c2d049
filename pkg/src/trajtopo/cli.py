"""Command-line interface.

Subcommands:
    compute   complexities of one bundle under one metric
    grid      complexities + gap correlations over a directory of bundles
    synth     write a synthetic point cloud as a weight-only bundle
    kendall   recompute correlation coefficients from a grid report
    validate  check a bundle against every format invariant

Exit codes: 0 success, 1 input/validation failure, 2 computation failure.
All randomness derives from --seed; pass --no-timestamp for byte-identical
reports across reruns.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, bundle as bundle_mod, metrics, ph0, synth
from .errors import (
    ChecksumMismatch,
    MetadataParse,
    MissingFile,
    NonFiniteEntry,
    ShapeMismatch,
    TopoError,
    ValueOutOfRange,
)

_INPUT_ERRORS = (
    MissingFile,
    MetadataParse,
    ShapeMismatch,
    NonFiniteEntry,
    ValueOutOfRange,
    ChecksumMismatch,
)


def _dump_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _ph_dim_dict(est: ph0.PhDimEstimate):
    return {
        "dim": est.dim if np.isfinite(est.dim) else "inf",
        "slope": est.slope,
        "sample_sizes": est.sample_sizes,
        "log_e1_values": est.log_e1_values,
        "r_squared": est.r_squared,
        "degenerate": est.degenerate,
    }


def _scale_token(raw: str) -> str:
    if raw == "sqrt-n":
        return raw
    value = float(raw)  # raises ValueError on junk
    if value <= 0:
        raise ValueError(f"scale {raw} must be positive")
    return f"{value:g}"


def _complexity_spec(args, metrics_list) -> analysis.ComplexitySpec:
    protocol = ph0.DimFitProtocol(
        min_size=args.dim_min_size,
        step=args.dim_step,
        repeats=args.dim_repeats,
        seed=args.seed,
    )
    return analysis.ComplexitySpec(
        metrics=tuple(metrics_list),
        p=args.p,
        alphas=tuple(args.e_alpha or [1.0]),
        scales=tuple(args.mag_scale or ["sqrt-n", "0.01"]),
        subsample=args.subsample,
        proj_eps=args.proj_eps,
        proj_dim=args.proj_dim,
        with_pmag=args.pmag,
        ph_dim=args.ph_dim,
        dim_protocol=protocol,
        gap_mode=getattr(args, "gap_mode", "worst"),
        seed=args.seed,
    )


def _resolved_config(args, command):
    # the output destination is not part of the computation, so two runs
    # that differ only in --out produce identical reports
    skip = {"func", "errors_json", "out"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg["command"] = command
    return cfg


# --- compute ----------------------------------------------------------------

def _cmd_compute(args):
    b = bundle_mod.load_bundle(args.bundle)
    spec = _complexity_spec(args, [args.metric])
    run_id = Path(args.bundle).name

    dm = None
    if args.dist_cache:
        token = {"euclid": "euclidean", "rho-p": f"rho_p{args.p:g}",
                 "zero-one": "zero_one"}[args.metric]
        dm = metrics.load_distance_cache(args.dist_cache, token)
        if dm is None:
            dm = analysis.distance_matrix_for(b, args.metric, spec)
            metrics.write_distance_cache(
                dm, args.dist_cache,
                {"seed": args.seed, "fraction": args.subsample,
                 "proj_eps": args.proj_eps},
            )

    record = analysis.compute_complexities(b, args.metric, spec, run_id, dm=dm)
    report = {
        "run_id": run_id,
        "config": _resolved_config(args, "compute"),
        "metric_kind": record.metric_kind,
        "e_alpha": {f"{a:g}": v for a, v in record.e_alpha.items()},
        "magnitude": record.scale_details,
        "ph_dim": _ph_dim_dict(record.ph_dim) if record.ph_dim else None,
    }
    if not args.no_timestamp:
        report["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    _dump_json(report, args.out)
    return 0


# --- grid -------------------------------------------------------------------

def _grid_one(item):
    """Process one bundle under every requested metric.

    Returns (records, failures); a load or gap failure yields a single
    failure entry, a per-metric failure leaves the other metrics intact.
    """
    run_id, path, spec = item
    records, failures = [], []
    try:
        b = bundle_mod.load_bundle(path)
        gaps = analysis.gap_record(run_id, b)
    except TopoError as exc:
        return [], [{"run_id": run_id, "metric": None,
                     "error": f"{type(exc).__name__}: {exc}"}]
    for metric in spec.metrics:
        try:
            record = analysis.compute_complexities(b, metric, spec, run_id)
        except TopoError as exc:
            failures.append({"run_id": run_id, "metric": metric,
                             "error": f"{type(exc).__name__}: {exc}"})
            continue
        records.append(analysis.RunRecord(
            run_id=run_id,
            meta=b.run_meta.to_dict(),
            metric_kind=record.metric_kind,
            complexities=analysis.complexity_columns(record, spec.with_pmag),
            gap_worst=gaps.gap_worst,
            gap_final=gaps.gap_final,
            scale_details=record.scale_details,
        ))
    return records, failures


def _cmd_grid(args):
    root = Path(args.root)
    if not root.is_dir():
        raise MissingFile(f"grid root {root} is not a directory")
    bundle_dirs = sorted(p for p in root.iterdir() if (p / "meta.json").is_file())
    if not bundle_dirs:
        raise MissingFile(f"no bundle directories under {root}")

    file_spec = {}
    if args.spec:
        try:
            file_spec = json.loads(Path(args.spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise MetadataParse(f"grid spec {args.spec}: {exc}") from exc

    try:
        metrics_list = file_spec.get("metrics", ["rho-p"])
        protocol = ph0.DimFitProtocol(
            min_size=int(file_spec.get("dim_min_size", args.dim_min_size)),
            step=file_spec.get("dim_step", args.dim_step),
            repeats=int(file_spec.get("dim_repeats", args.dim_repeats)),
            seed=args.seed,
        )
        spec = analysis.ComplexitySpec(
            metrics=tuple(metrics_list),
            p=float(file_spec.get("p", args.p)),
            alphas=tuple(float(a)
                         for a in file_spec.get("alphas", args.e_alpha or [1.0])),
            scales=tuple(_scale_token(str(s))
                         for s in file_spec.get("scales",
                                                args.mag_scale or ["sqrt-n", "0.01"])),
            subsample=float(file_spec.get("subsample", args.subsample)),
            proj_eps=file_spec.get("proj_eps", args.proj_eps),
            proj_dim=file_spec.get("proj_dim", args.proj_dim),
            with_pmag=bool(file_spec.get("pmag", args.pmag)),
            ph_dim=bool(file_spec.get("ph_dim", args.ph_dim)),
            dim_protocol=protocol,
            gap_mode=file_spec.get("gap_mode", "worst"),
            seed=args.seed,
        )
    except (TypeError, ValueError) as exc:
        raise MetadataParse(f"grid spec: {exc}") from exc

    jobs = [(path.name, path, spec) for path in bundle_dirs]
    runs, failures = [], []
    if args.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as pool:
            for records, fails in pool.map(_grid_one, jobs):
                runs.extend(records)
                failures.extend(fails)
    else:
        for item in jobs:
            records, fails = _grid_one(item)
            runs.extend(records)
            failures.extend(fails)

    runs.sort(key=lambda r: (r.run_id, r.metric_kind))
    failures.sort(key=lambda f: (f["run_id"], f["metric"] or ""))
    report = analysis.GridReport(
        runs=runs,
        coefficients=analysis.aggregate_coefficients(
            runs, spec.gap_mode, args.degenerate_as_zero
        ),
        failures=failures,
        gap_mode=spec.gap_mode,
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "config": _resolved_config(args, "grid"),
        "grid_spec": file_spec,
        "gap_mode": report.gap_mode,
        "runs": [_run_dict(r) for r in report.runs],
        "coefficients": report.coefficients,
        "failures": report.failures,
    }
    if not args.no_timestamp:
        payload["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    _dump_json(payload, out_dir / "report.json")
    _write_flat_csv(report, out_dir / "runs.csv")
    _write_scatter_files(report, out_dir)
    print(f"grid: {len(report.runs)} runs, {len(report.failures)} failures "
          f"-> {out_dir}")
    return 0


def _run_dict(run):
    return {
        "run_id": run.run_id,
        "meta": run.meta,
        "metric_kind": run.metric_kind,
        "complexities": run.complexities,
        "gap_worst": run.gap_worst,
        "gap_final": run.gap_final,
        "magnitude": run.scale_details,
    }


def _write_flat_csv(report, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "metric", "learning_rate", "batch_size",
                         "complexity_name", "complexity", "gap_worst", "gap_final"])
        for run in report.runs:
            for name in sorted(run.complexities):
                writer.writerow([
                    run.run_id, run.metric_kind,
                    repr(run.meta["learning_rate"]), run.meta["batch_size"],
                    name, repr(run.complexities[name]),
                    repr(run.gap_worst), repr(run.gap_final),
                ])


def _write_scatter_files(report, out_dir):
    gap_attr = "gap_worst" if report.gap_mode == "worst" else "gap_final"
    by_pair = {}
    for run in report.runs:
        for name, value in run.complexities.items():
            by_pair.setdefault((name, run.metric_kind), []).append((run, value))
    for (name, metric), entries in sorted(by_pair.items()):
        with open(out_dir / f"{name}_{metric}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["run_id", "learning_rate", "batch_size",
                             "complexity", "gap"])
            for run, value in entries:
                writer.writerow([
                    run.run_id, repr(run.meta["learning_rate"]),
                    run.meta["batch_size"], repr(value),
                    repr(getattr(run, gap_attr)),
                ])


# --- synth ------------------------------------------------------------------

def _cmd_synth(args):
    base = None
    if args.shape == "duplicated":
        base = synth.SynthSpec(
            shape=args.base_shape, n_points=args.n, seed=args.seed,
            dim=args.dim, sep=args.sep,
        )
    spec = synth.SynthSpec(
        shape=args.shape,
        n_points=args.n,
        seed=args.seed,
        noise=args.noise,
        dim=args.dim,
        sep=args.sep,
        copies=args.copies,
        base=base,
    )
    cloud = synth.sample_points(spec)
    n = cloud.matrix.shape[0]
    meta = bundle_mod.RunMeta(
        learning_rate=1.0, batch_size=1, optimizer="none", seed=args.seed,
        n_train=n, loss_bound=1.0, tau=0, T=n - 1,
        dataset=f"synth-{args.shape}", model="point-cloud",
    )
    b = bundle_mod.TrajectoryBundle(
        run_meta=meta,
        iteration_index=np.arange(n, dtype=np.int64),
        weights=cloud,
    )
    bundle_mod.write_bundle(b, args.out)
    print(f"synth: wrote {n} x {cloud.matrix.shape[1]} cloud to {args.out}")
    return 0


# --- kendall ----------------------------------------------------------------

def _cmd_kendall(args):
    try:
        payload = json.loads(Path(args.grid).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MetadataParse(f"{args.grid}: {exc}") from exc
    gap_mode = payload.get("gap_mode", "worst")
    runs = [
        analysis.RunRecord(
            run_id=r["run_id"], meta=r["meta"], metric_kind=r["metric_kind"],
            complexities=r["complexities"], gap_worst=r["gap_worst"],
            gap_final=r["gap_final"], scale_details=r.get("magnitude", []),
        )
        for r in payload.get("runs", [])
    ]
    coefficients = analysis.aggregate_coefficients(
        runs, gap_mode, args.degenerate_as_zero
    )
    _dump_json({"gap_mode": gap_mode, "coefficients": coefficients}, args.out)
    return 0


# --- validate ---------------------------------------------------------------

def _cmd_validate(args):
    b = bundle_mod.load_bundle(args.bundle)
    report = bundle_mod.validate_bundle(b)
    if report.ok:
        print(f"{args.bundle}: OK "
              f"({b.t_pts} points, trajectories: "
              f"{', '.join(n for n, _ in b.present_trajectories()) or 'none'})")
        return 0
    for violation in report.violations:
        print(f"{args.bundle}: {violation}", file=sys.stderr)
    return 1


# --- parser -----------------------------------------------------------------

def _add_common(parser):
    parser.add_argument("--seed", type=int, default=0,
                        help="master seed; all randomness derives from it")
    parser.add_argument("--errors-json", action="store_true",
                        help="emit machine-readable errors on stderr")
    parser.add_argument("--no-timestamp", action="store_true",
                        help="omit timestamps so reruns are byte-identical")


def _add_complexity_flags(parser):
    parser.add_argument("--p", type=float, default=1.0,
                        help="order of the loss pseudometric (default 1)")
    parser.add_argument("--subsample", type=float, default=0.10, metavar="FRAC",
                        help="fraction of loss columns to keep (default 0.10)")
    parser.add_argument("--proj-eps", type=float, default=None,
                        help="distortion budget for the sparse projection")
    parser.add_argument("--proj-dim", default="auto",
                        help="projection dimension, or 'auto'")
    parser.add_argument("--e-alpha", type=float, action="append", metavar="A",
                        help="lifetime-sum exponent, repeatable (default 1.0)")
    parser.add_argument("--mag-scale", type=_scale_token, action="append",
                        metavar="S",
                        help="magnitude scale: 'sqrt-n' or a positive real; "
                             "repeatable (default sqrt-n and 0.01)")
    parser.add_argument("--pmag", action="store_true", default=True,
                        help="include positive magnitude (default on)")
    parser.add_argument("--no-pmag", dest="pmag", action="store_false")
    parser.add_argument("--ph-dim", action="store_true",
                        help="estimate the intrinsic dimension")
    parser.add_argument("--dim-min-size", type=int, default=1000)
    parser.add_argument("--dim-step", type=int, default=None)
    parser.add_argument("--dim-repeats", type=int, default=5)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="topo",
        description="Topology-based generalization indicators for recorded "
                    "optimizer trajectories.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="complexities of one bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--metric", choices=["euclid", "rho-p", "zero-one"],
                   default="rho-p")
    _add_complexity_flags(p)
    p.add_argument("--dist-cache", default=None, metavar="DIR",
                   help="directory for distance-matrix cache files")
    p.add_argument("--out", default=None, help="report path (default stdout)")
    _add_common(p)
    p.set_defaults(func=_cmd_compute)

    p = sub.add_parser("grid", help="process a directory of bundles")
    p.add_argument("--root", required=True, metavar="DIR")
    p.add_argument("--spec", default=None, metavar="FILE",
                   help="JSON grid spec (metrics, alphas, scales, ...)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--degenerate-as-zero", action="store_true",
                   help="count degenerate slices as 0 instead of skipping them")
    _add_complexity_flags(p)
    _add_common(p)
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("synth", help="write a synthetic point-cloud bundle")
    p.add_argument("--shape", required=True,
                   choices=["cube", "sphere_surface", "circle", "gaussian",
                            "two_cluster", "duplicated"])
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--sep", type=float, default=10.0)
    p.add_argument("--copies", type=int, default=2)
    p.add_argument("--base-shape", default="gaussian",
                   help="base cloud for --shape duplicated")
    p.add_argument("--out", required=True, metavar="DIR")
    _add_common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("kendall", help="coefficients from an existing report")
    p.add_argument("--grid", required=True, metavar="FILE")
    p.add_argument("--degenerate-as-zero", action="store_true")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_kendall)

    p = sub.add_parser("validate", help="check a bundle")
    p.add_argument("--bundle", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_validate)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        _report_error(args, exc)
        return 1
    except TopoError as exc:
        _report_error(args, exc)
        return 2


def _report_error(args, exc):
    if getattr(args, "errors_json", False):
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
    else:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
