"""Generalization gaps, rank correlations and grid-level aggregation.

Per-run complexity values (lifetime sums, magnitude, positive magnitude,
optionally an intrinsic-dimension estimate) are joined with generalization
gaps and correlated over a hyperparameter grid. Correlation uses the
tie-corrected Kendall tau-b plus granulated coefficients: tau averaged over
grid slices in which only one hyperparameter varies, then averaged across
hyperparameters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import magnitudes as mag_mod
from . import metrics as metrics_mod
from . import ph0
from .bundle import TrajectoryBundle
from .errors import (
    DegenerateInput,
    LengthMismatch,
    MissingRiskHistory,
    NoValidSlice,
    TopoError,
)

GRID_AXES = ("learning_rate", "batch_size")
AXIS_SHORT = {"learning_rate": "psi_lr", "batch_size": "psi_bs"}


def generalization_gap(bundle: TrajectoryBundle, mode: str = "worst") -> float:
    """Test-risk gap over the recorded window.

    ``worst``: maximum recorded test risk minus final train risk.
    ``final``: last recorded test risk minus final train risk.
    """
    if mode not in ("worst", "final"):
        raise ValueError(f"unknown gap mode {mode!r}")
    hist = bundle.risk_history
    if not hist:
        raise MissingRiskHistory("bundle has no risk_history records")
    final_train = hist[-1][1]
    test_risks = [r[2] for r in hist]
    test = max(test_risks) if mode == "worst" else test_risks[-1]
    return float(test - final_train)


def kendall_tau(x, y) -> float:
    """Tie-corrected Kendall rank correlation (tau-b), symmetric in x and y."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"got shapes {x.shape} and {y.shape}")
    n = len(x)
    if n < 2:
        raise LengthMismatch("need at least 2 observations")
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(n, 1)
    sx, sy = dx[iu], dy[iu]
    if not sx.any() or not sy.any():
        raise DegenerateInput("kendall tau undefined for a constant sequence")
    prod = sx * sy
    concordant = int((prod > 0).sum())
    discordant = int((prod < 0).sum())
    n0 = n * (n - 1) // 2
    n1 = int((sx == 0).sum())
    n2 = int((sy == 0).sum())
    return (concordant - discordant) / math.sqrt((n0 - n1) * (n0 - n2))


@dataclass
class GranulatedCoefficients:
    psi: dict                # axis name -> float or None when no valid slice
    skipped_slices: dict     # axis name -> number of degenerate/small slices
    Psi: float
    tau: Optional[float]     # plain tau over all rows, None if degenerate

    def to_dict(self):
        out = {AXIS_SHORT.get(a, a): self.psi[a] for a in self.psi}
        out["Psi"] = self.Psi
        out["tau"] = self.tau
        out["skipped_slices"] = dict(self.skipped_slices)
        return out


def granulated_kendall(rows, axes=GRID_AXES, degenerate_as_zero: bool = False) -> GranulatedCoefficients:
    """Granulated Kendall coefficients of ``rows`` over a hyperparameter grid.

    ``rows`` is a sequence of dicts with the axis values plus ``complexity``
    and ``gap``. For each axis, the grid is sliced by fixing all other axes;
    tau is computed inside each slice and averaged. Slices with fewer than 2
    points or a constant column are skipped and counted, or contribute 0.0
    when ``degenerate_as_zero`` is set.
    """
    rows = list(rows)
    if not rows:
        raise NoValidSlice("no rows to correlate")
    psi = {}
    skipped = {}
    for axis in axes:
        others = [a for a in axes if a != axis]
        groups = {}
        for row in rows:
            key = tuple(row[a] for a in others)
            groups.setdefault(key, []).append(row)
        taus = []
        n_skipped = 0
        for group in groups.values():
            if len(group) < 2:
                n_skipped += 1
                continue
            try:
                taus.append(kendall_tau(
                    [g["complexity"] for g in group],
                    [g["gap"] for g in group],
                ))
            except DegenerateInput:
                n_skipped += 1
                if degenerate_as_zero:
                    taus.append(0.0)
        psi[axis] = float(np.mean(taus)) if taus else None
        skipped[axis] = n_skipped

    valid = [p for p in psi.values() if p is not None]
    if not valid:
        raise NoValidSlice("every slice of every axis was degenerate")
    big_psi = float(np.mean(valid))

    try:
        tau = kendall_tau([r["complexity"] for r in rows], [r["gap"] for r in rows])
    except DegenerateInput:
        tau = 0.0 if degenerate_as_zero else None

    return GranulatedCoefficients(psi=psi, skipped_slices=skipped, Psi=big_psi, tau=tau)


# ---------------------------------------------------------------------------
# per-run complexity computation and grid aggregation
# ---------------------------------------------------------------------------

@dataclass
class ComplexitySpec:
    """Which complexities to compute per (bundle, metric) pair."""
    metrics: tuple = ("rho_p",)
    p: float = 1.0
    alphas: tuple = (1.0,)
    scales: tuple = ("sqrt-n", "0.01")  # tokens: "sqrt-n" or a positive real
    subsample: float = 1.0
    proj_eps: Optional[float] = None
    proj_dim: object = "auto"  # "auto" or an explicit int
    with_pmag: bool = True
    ph_dim: bool = False
    dim_protocol: ph0.DimFitProtocol = field(default_factory=ph0.DimFitProtocol)
    gap_mode: str = "worst"
    seed: int = 0


@dataclass
class ComplexityRecord:
    run_id: str
    metric_kind: str
    e_alpha: dict          # alpha -> value
    mag: dict              # scale token -> value
    pmag: dict             # scale token -> value
    scale_details: list    # per scale: dict(scale, mag, pmag, residual, ...)
    ph_dim: Optional[ph0.PhDimEstimate] = None


@dataclass
class GapRecord:
    run_id: str
    gap_worst: float
    gap_final: float


def gap_record(run_id: str, bundle: TrajectoryBundle) -> GapRecord:
    """Both gap variants from one risk history."""
    return GapRecord(
        run_id=run_id,
        gap_worst=generalization_gap(bundle, "worst"),
        gap_final=generalization_gap(bundle, "final"),
    )


def resolve_scale(token, n_train: int) -> float:
    """Scale tokens resolve against the run's full training-set size."""
    if token == "sqrt-n":
        return math.sqrt(n_train)
    return float(token)


def distance_matrix_for(bundle: TrajectoryBundle, metric: str, spec: ComplexitySpec):
    if metric in ("euclidean", "euclid"):
        if bundle.weights is None:
            raise TopoError("bundle has no weight trajectory for the euclidean metric")
        proj = None
        if spec.proj_eps is not None:
            proj = metrics_mod.ProjectionSpec(
                distortion_eps=spec.proj_eps, seed=spec.seed,
                target_dim=spec.proj_dim,
            )
        return metrics_mod.euclidean_distance_matrix(bundle.weights, proj)
    if metric in ("rho_p", "rho-p"):
        if bundle.losses is None:
            raise TopoError("bundle has no loss trajectory for the rho_p metric")
        losses = metrics_mod.subsample_columns(bundle.losses, spec.subsample, spec.seed)
        return metrics_mod.loss_pseudometric_matrix(losses, spec.p)
    if metric in ("zero_one", "zero-one"):
        if bundle.losses01 is None:
            raise TopoError("bundle has no 0/1 loss trajectory for the zero_one metric")
        losses01 = metrics_mod.subsample_columns(bundle.losses01, spec.subsample, spec.seed)
        return metrics_mod.zero_one_pseudometric_matrix(losses01)
    raise ValueError(f"unknown metric {metric!r}")


def compute_complexities(bundle: TrajectoryBundle, metric: str, spec: ComplexitySpec,
                         run_id: str = "", dm=None) -> ComplexityRecord:
    """Compute every requested complexity of one bundle under one metric.

    A precomputed distance matrix can be passed to skip the construction
    step (e.g. when it came from the on-disk cache).
    """
    if dm is None:
        dm = distance_matrix_for(bundle, metric, spec)
    edges = ph0.minimum_spanning_edges(dm)
    e_values = {float(a): ph0.e_alpha(edges, float(a)) for a in spec.alphas}

    quotient = mag_mod.metric_identification(dm)
    mags, pmags, details = {}, {}, []
    for token in spec.scales:
        s = resolve_scale(token, bundle.run_meta.n_train)
        res = mag_mod.magnitude_result(quotient, s)
        key = str(token)
        mags[key] = res.mag
        pmags[key] = res.pmag
        details.append({
            "scale_token": key,
            "scale": res.scale,
            "mag": res.mag,
            "pmag": res.pmag,
            "residual": res.residual,
            "solver": res.solver,
            "conditioning_flag": res.conditioning_flag,
        })

    dim_estimate = None
    if spec.ph_dim:
        dim_estimate = ph0.estimate_ph_dim(dm, spec.dim_protocol)

    return ComplexityRecord(
        run_id=run_id,
        metric_kind=dm.kind_token(),
        e_alpha=e_values,
        mag=mags,
        pmag=pmags,
        scale_details=details,
        ph_dim=dim_estimate,
    )


def complexity_columns(record: ComplexityRecord, with_pmag: bool = True) -> dict:
    """Flatten a record into named complexity columns for correlation."""
    cols = {}
    for alpha, value in record.e_alpha.items():
        cols[f"e_alpha_{alpha:g}"] = value
    for token, value in record.mag.items():
        cols[f"mag_{token}"] = value
    if with_pmag:
        for token, value in record.pmag.items():
            cols[f"pmag_{token}"] = value
    if record.ph_dim is not None and not record.ph_dim.degenerate:
        cols["ph_dim"] = record.ph_dim.dim
    return cols


@dataclass
class RunRecord:
    run_id: str
    meta: dict
    metric_kind: str
    complexities: dict      # column name -> value
    gap_worst: float
    gap_final: float
    scale_details: list


@dataclass
class GridReport:
    runs: list              # RunRecord
    coefficients: dict      # metric token -> complexity column -> coefficient dict
    failures: list          # dicts with run_id / metric / error
    gap_mode: str


def aggregate_coefficients(runs, gap_mode: str = "worst",
                           degenerate_as_zero: bool = False) -> dict:
    """Correlation coefficients per metric and complexity column."""
    gap_attr = "gap_worst" if gap_mode == "worst" else "gap_final"
    by_metric = {}
    for run in runs:
        by_metric.setdefault(run.metric_kind, []).append(run)
    coefficients = {}
    for metric, metric_runs in sorted(by_metric.items()):
        columns = sorted({c for r in metric_runs for c in r.complexities})
        coefficients[metric] = {}
        for column in columns:
            rows = [
                {
                    "learning_rate": r.meta["learning_rate"],
                    "batch_size": r.meta["batch_size"],
                    "complexity": r.complexities[column],
                    "gap": getattr(r, gap_attr),
                }
                for r in metric_runs if column in r.complexities
            ]
            try:
                coeffs = granulated_kendall(
                    rows, degenerate_as_zero=degenerate_as_zero
                ).to_dict()
            except NoValidSlice:
                coeffs = {"psi_lr": None, "psi_bs": None, "Psi": None,
                          "tau": None, "skipped_slices": {}}
            coefficients[metric][column] = coeffs
    return coefficients


def build_grid_report(bundles, spec: ComplexitySpec,
                      degenerate_as_zero: bool = False) -> GridReport:
    """Join per-run complexities with gaps and correlate over the grid.

    ``bundles`` is a sequence of (run_id, TrajectoryBundle). Failing runs are
    recorded in ``failures`` and excluded from the coefficients; they never
    abort the report.
    """
    runs = []
    failures = []
    for run_id, bundle in bundles:
        try:
            gaps = gap_record(run_id, bundle)
        except TopoError as exc:
            failures.append({"run_id": run_id, "metric": None,
                             "error": f"{type(exc).__name__}: {exc}"})
            continue
        for metric in spec.metrics:
            try:
                record = compute_complexities(bundle, metric, spec, run_id)
            except TopoError as exc:
                failures.append({"run_id": run_id, "metric": metric,
                                 "error": f"{type(exc).__name__}: {exc}"})
                continue
            runs.append(RunRecord(
                run_id=run_id,
                meta=bundle.run_meta.to_dict(),
                metric_kind=record.metric_kind,
                complexities=complexity_columns(record, spec.with_pmag),
                gap_worst=gaps.gap_worst,
                gap_final=gaps.gap_final,
                scale_details=record.scale_details,
            ))

    coefficients = aggregate_coefficients(runs, spec.gap_mode, degenerate_as_zero)
    return GridReport(runs=runs, coefficients=coefficients, failures=failures,
                      gap_mode=spec.gap_mode)
