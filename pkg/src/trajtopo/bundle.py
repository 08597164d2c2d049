"""On-disk trajectory bundles.

A bundle is a directory holding one recorded optimization run:

    meta.json          run metadata, shape declarations, iteration index,
                       sample ids and sha256 checksums of the binary files
    weights.f64        optional, row-major float64 little-endian, rows are
                       flattened parameter vectors
    losses.f64         optional, row-major float64, rows are per-sample
                       surrogate losses on the retained sample subset
    losses01.u8        optional, row-major uint8 in {0, 1}, rows are
                       per-sample 0/1 losses on the retained subset
    risk_history.csv   header ``iteration,train_risk,test_risk``

Shapes live only in ``meta.json``; the binaries carry no header, so they can
be produced from any training ecosystem without a framework dependency.
Floats in ``meta.json`` are serialized with ``repr`` round-trip fidelity, so
``load_bundle(write_bundle(b))`` reproduces ``b`` bit-exactly.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    ChecksumMismatch,
    IoError,
    MetadataParse,
    MissingFile,
    NonFiniteEntry,
    ShapeMismatch,
    ValueOutOfRange,
)

FORMAT_VERSION = 1

_WEIGHTS_FILE = "weights.f64"
_LOSSES_FILE = "losses.f64"
_LOSSES01_FILE = "losses01.u8"
_RISK_FILE = "risk_history.csv"
_META_FILE = "meta.json"


@dataclass
class RunMeta:
    learning_rate: float
    batch_size: int
    optimizer: str
    seed: int
    n_train: int
    loss_bound: float
    tau: int
    T: int
    dataset: str
    model: str

    def to_dict(self):
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "optimizer": self.optimizer,
            "seed": self.seed,
            "n_train": self.n_train,
            "loss_bound": self.loss_bound,
            "tau": self.tau,
            "T": self.T,
            "dataset": self.dataset,
            "model": self.model,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                learning_rate=float(d["learning_rate"]),
                batch_size=int(d["batch_size"]),
                optimizer=str(d["optimizer"]),
                seed=int(d["seed"]),
                n_train=int(d["n_train"]),
                loss_bound=float(d["loss_bound"]),
                tau=int(d["tau"]),
                T=int(d["T"]),
                dataset=str(d["dataset"]),
                model=str(d["model"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MetadataParse(f"bad run_meta: {exc}") from exc


@dataclass
class WeightTrajectory:
    matrix: np.ndarray  # (T_pts, D) float64


@dataclass
class LossTrajectory:
    matrix: np.ndarray  # (T_pts, m) float64 in [0, loss_bound]
    sample_ids: np.ndarray  # (m,) int64
    subsample_fraction: float = 1.0


@dataclass
class BinaryLossTrajectory:
    matrix: np.ndarray  # (T_pts, m) uint8 in {0, 1}
    sample_ids: np.ndarray  # (m,) int64


@dataclass
class TrajectoryBundle:
    run_meta: RunMeta
    iteration_index: np.ndarray  # (T_pts,) int64, shared by all trajectories
    weights: Optional[WeightTrajectory] = None
    losses: Optional[LossTrajectory] = None
    losses01: Optional[BinaryLossTrajectory] = None
    # list of (iteration, train_risk, test_risk)
    risk_history: list = field(default_factory=list)

    @property
    def t_pts(self) -> int:
        return len(self.iteration_index)

    def present_trajectories(self):
        out = []
        if self.weights is not None:
            out.append(("weights", self.weights.matrix))
        if self.losses is not None:
            out.append(("losses", self.losses.matrix))
        if self.losses01 is not None:
            out.append(("losses01", self.losses01.matrix))
        return out


@dataclass
class ValidationReport:
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_bundle(bundle: TrajectoryBundle, path) -> None:
    """Write ``bundle`` to directory ``path`` in the documented layout."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        shapes = {}
        sample_ids = {}
        checksums = {}

        def dump(name, arr, dtype):
            arr = np.ascontiguousarray(arr, dtype=dtype)
            fpath = path / name
            with open(fpath, "wb") as fh:
                arr.tofile(fh)
            checksums[name] = _sha256(fpath)
            return [int(x) for x in arr.shape]

        if bundle.weights is not None:
            shapes["weights"] = dump(_WEIGHTS_FILE, bundle.weights.matrix, "<f8")
        if bundle.losses is not None:
            shapes["losses"] = dump(_LOSSES_FILE, bundle.losses.matrix, "<f8")
            sample_ids["losses"] = [int(x) for x in bundle.losses.sample_ids]
        if bundle.losses01 is not None:
            shapes["losses01"] = dump(_LOSSES01_FILE, bundle.losses01.matrix, "u1")
            sample_ids["losses01"] = [int(x) for x in bundle.losses01.sample_ids]

        with open(path / _RISK_FILE, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "train_risk", "test_risk"])
            for it, tr, te in bundle.risk_history:
                writer.writerow([int(it), repr(float(tr)), repr(float(te))])
        checksums[_RISK_FILE] = _sha256(path / _RISK_FILE)

        meta = {
            "format_version": FORMAT_VERSION,
            "run_meta": bundle.run_meta.to_dict(),
            "iteration_index": [int(x) for x in bundle.iteration_index],
            "shapes": shapes,
            "sample_ids": sample_ids,
            "checksums": checksums,
        }
        if bundle.losses is not None:
            meta["subsample_fraction"] = float(bundle.losses.subsample_fraction)
        with open(path / _META_FILE, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write bundle at {path}: {exc}") from exc


def _read_binary(path: Path, name, shape, dtype, checksum=None):
    fpath = path / name
    if not fpath.is_file():
        raise MissingFile(f"{fpath} declared in meta.json but absent")
    itemsize = np.dtype(dtype).itemsize
    expected = int(np.prod(shape)) * itemsize
    actual = os.path.getsize(fpath)
    if actual != expected:
        raise ShapeMismatch(
            f"{fpath}: {actual} bytes on disk, meta.json declares "
            f"shape {shape} ({expected} bytes)"
        )
    if checksum is not None and _sha256(fpath) != checksum:
        raise ChecksumMismatch(f"{fpath}: content does not match recorded sha256")
    arr = np.fromfile(fpath, dtype=dtype).reshape(shape)
    return arr


def load_bundle(path) -> TrajectoryBundle:
    """Load and structurally validate a bundle directory.

    Raises MissingFile, MetadataParse, ShapeMismatch, ChecksumMismatch,
    NonFiniteEntry or ValueOutOfRange. Invariant-level problems (e.g. a loss
    above the declared bound) are reported by ``validate_bundle`` instead.
    """
    path = Path(path)
    meta_path = path / _META_FILE
    if not path.is_dir() or not meta_path.is_file():
        raise MissingFile(f"no bundle at {path} (missing {_META_FILE})")
    try:
        with open(meta_path) as fh:
            meta = json.load(fh)
    except (json.JSONDecodeError, OSError) as exc:
        raise MetadataParse(f"{meta_path}: {exc}") from exc

    try:
        run_meta = RunMeta.from_dict(meta["run_meta"])
        iteration_index = np.asarray(meta["iteration_index"], dtype=np.int64)
        shapes = meta["shapes"]
        sample_ids = meta.get("sample_ids", {})
        checksums = meta.get("checksums", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise MetadataParse(f"{meta_path}: missing or malformed key: {exc}") from exc

    weights = losses = losses01 = None

    if "weights" in shapes:
        mat = _read_binary(path, _WEIGHTS_FILE, shapes["weights"], "<f8",
                           checksums.get(_WEIGHTS_FILE))
        if not np.isfinite(mat).all():
            raise NonFiniteEntry("weights.f64 contains non-finite values")
        weights = WeightTrajectory(matrix=mat)

    if "losses" in shapes:
        mat = _read_binary(path, _LOSSES_FILE, shapes["losses"], "<f8",
                           checksums.get(_LOSSES_FILE))
        if not np.isfinite(mat).all():
            raise NonFiniteEntry("losses.f64 contains non-finite values")
        ids = np.asarray(sample_ids.get("losses", range(mat.shape[1])), dtype=np.int64)
        losses = LossTrajectory(
            matrix=mat,
            sample_ids=ids,
            subsample_fraction=float(meta.get("subsample_fraction", 1.0)),
        )

    if "losses01" in shapes:
        mat = _read_binary(path, _LOSSES01_FILE, shapes["losses01"], "u1",
                           checksums.get(_LOSSES01_FILE))
        if mat.size and mat.max() > 1:
            raise ValueOutOfRange("losses01.u8 contains values outside {0, 1}")
        ids = np.asarray(sample_ids.get("losses01", range(mat.shape[1])), dtype=np.int64)
        losses01 = BinaryLossTrajectory(matrix=mat, sample_ids=ids)

    if weights is None and losses is None and losses01 is None:
        raise MetadataParse(f"{meta_path}: no trajectory declared in shapes")

    risk_history = []
    risk_path = path / _RISK_FILE
    if risk_path.is_file():
        try:
            with open(risk_path, newline="") as fh:
                reader = csv.DictReader(fh)
                for row in reader:
                    risk_history.append(
                        (int(row["iteration"]),
                         float(row["train_risk"]),
                         float(row["test_risk"]))
                    )
        except (KeyError, TypeError, ValueError) as exc:
            raise MetadataParse(f"{risk_path}: {exc}") from exc

    return TrajectoryBundle(
        run_meta=run_meta,
        iteration_index=iteration_index,
        weights=weights,
        losses=losses,
        losses01=losses01,
        risk_history=risk_history,
    )


def validate_bundle(bundle: TrajectoryBundle) -> ValidationReport:
    """Check every bundle invariant; violations are data, not errors."""
    v = []
    meta = bundle.run_meta

    if meta.tau > meta.T:
        v.append(f"run_meta: tau={meta.tau} exceeds T={meta.T}")
    if meta.n_train < 1:
        v.append(f"run_meta: n_train={meta.n_train} must be >= 1")
    if meta.loss_bound <= 0:
        v.append(f"run_meta: loss_bound={meta.loss_bound} must be > 0")
    if meta.learning_rate <= 0:
        v.append(f"run_meta: learning_rate={meta.learning_rate} must be > 0")
    if meta.batch_size < 1:
        v.append(f"run_meta: batch_size={meta.batch_size} must be >= 1")

    present = bundle.present_trajectories()
    if not present:
        v.append("bundle: no trajectory present (need weights, losses or losses01)")

    t_pts = bundle.t_pts
    for name, mat in present:
        if mat.ndim != 2:
            v.append(f"{name}: expected a 2-d matrix, got ndim={mat.ndim}")
            continue
        if mat.shape[0] != t_pts:
            v.append(f"{name}: {mat.shape[0]} rows but iteration_index has {t_pts}")
        if not np.isfinite(np.asarray(mat, dtype=np.float64)).all():
            v.append(f"{name}: non-finite entries")

    idx = bundle.iteration_index
    if len(idx) and np.any(np.diff(idx) <= 0):
        v.append("iteration_index: not strictly increasing")
    if len(idx) and (idx[0] < meta.tau or idx[-1] > meta.T):
        v.append(
            f"iteration_index: range [{idx[0]}, {idx[-1]}] outside "
            f"recording window [{meta.tau}, {meta.T}]"
        )

    if bundle.losses is not None:
        mat = bundle.losses.matrix
        if mat.size and (mat.min() < 0 or mat.max() > meta.loss_bound):
            v.append(
                f"losses: entries outside [0, loss_bound={meta.loss_bound}] "
                f"(observed range [{mat.min()}, {mat.max()}])"
            )
        if mat.shape[1] != len(bundle.losses.sample_ids):
            v.append("losses: column count differs from len(sample_ids)")
        frac = bundle.losses.subsample_fraction
        if not (0 < frac <= 1):
            v.append(f"losses: subsample_fraction={frac} outside (0, 1]")

    if bundle.losses01 is not None:
        mat = bundle.losses01.matrix
        if mat.size and not np.isin(mat, (0, 1)).all():
            v.append("losses01: entries outside {0, 1}")
        if mat.shape[1] != len(bundle.losses01.sample_ids):
            v.append("losses01: column count differs from len(sample_ids)")

    if bundle.risk_history:
        its = np.array([r[0] for r in bundle.risk_history])
        vals = np.array([[r[1], r[2]] for r in bundle.risk_history], dtype=float)
        if np.any(np.diff(its) <= 0):
            v.append("risk_history: iterations not strictly increasing")
        if its[0] < meta.tau or its[-1] > meta.T:
            v.append(
                f"risk_history: iterations outside window [{meta.tau}, {meta.T}]"
            )
        if not np.isfinite(vals).all():
            v.append("risk_history: non-finite risk values")

    return ValidationReport(violations=v)
