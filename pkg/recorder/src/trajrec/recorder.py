"""Trajectory recorder for plain training loops.

The recorder observes a training loop through three callables (flattened
parameters, per-sample losses on a retained subset, train/test risks) and
writes the observed window as a bundle directory in the trajtopo on-disk
layout: ``meta.json`` + raw binaries + ``risk_history.csv``. Writing is
append-then-finalize: everything lands in a scratch directory that is
atomically renamed onto the target when the window completes, so readers
never see a partial bundle.

This package intentionally does not import trajtopo; the file format is
the contract.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np


class ShapeDrift(RuntimeError):
    """Parameter count changed in the middle of a recorded window."""


class WriteFailure(RuntimeError):
    pass


@dataclass
class RunInfo:
    """Metadata fields of the run, mirrored into meta.json."""
    learning_rate: float
    batch_size: int
    optimizer: str
    seed: int
    n_train: int
    loss_bound: float
    dataset: str
    model: str


@dataclass
class RecorderConfig:
    record_window: Tuple[int, int]          # (tau, T), inclusive
    output_dir: str
    weight_mode: str = "full"               # full | projected | none
    projection_eps: float = 0.1
    projection_seed: int = 0
    loss_subset_fraction: float = 0.10
    risk_eval_period: int = 100
    record_losses: bool = True
    record_losses01: bool = True

    def __post_init__(self):
        tau, big_t = self.record_window
        if tau > big_t:
            raise ValueError(f"record window ({tau}, {big_t}) has tau > T")
        if not (0 < self.loss_subset_fraction <= 1):
            raise ValueError("loss_subset_fraction must be in (0, 1]")
        if self.weight_mode not in ("full", "projected", "none"):
            raise ValueError(f"unknown weight_mode {self.weight_mode!r}")


def _sparse_sign_projection(dim_in: int, dim_out: int, seed: int):
    """Same construction the analysis side documents: density 1/sqrt(d),
    nonzeros +/- sqrt(1/(density*k))."""
    density = 1.0 / math.sqrt(dim_in)
    value = math.sqrt(1.0 / (density * dim_out))
    rng = np.random.Generator(np.random.Philox(seed))
    cols = []
    for _ in range(dim_out):
        nnz = rng.binomial(dim_in, density)
        rows = np.sort(rng.choice(dim_in, size=nnz, replace=False))
        signs = rng.integers(0, 2, size=nnz) * 2 - 1
        cols.append((rows, signs * value))
    return cols


def _apply_projection(vec, cols):
    out = np.empty(len(cols))
    for j, (rows, vals) in enumerate(cols):
        out[j] = float(vec[rows] @ vals)
    return out


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class TrajectoryRecorder:
    """Records one training window and writes it as a bundle directory.

    Parameters are provided as callables so any training loop can attach:

    * ``get_flat_params()`` -> 1-d float64 view of all parameters, in a
      fixed traversal order that must not change during the window
    * ``eval_subset(sample_ids)`` -> (surrogate losses in [0, loss_bound],
      correctness indicators) for the retained samples
    * ``eval_risks()`` -> (train_risk, test_risk)

    Call ``on_step(iteration)`` after parameters for ``iteration`` are in
    place; call ``finalize()`` once the window is done (``on_step`` past T
    finalizes automatically and returns False).
    """

    def __init__(self, config: RecorderConfig, run_info: RunInfo,
                 get_flat_params: Callable[[], np.ndarray],
                 eval_subset: Optional[Callable] = None,
                 eval_risks: Optional[Callable] = None):
        self.config = config
        self.run_info = run_info
        self._get_params = get_flat_params
        self._eval_subset = eval_subset
        self._eval_risks = eval_risks
        self.tau, self.T = config.record_window

        rng = np.random.Generator(np.random.Philox(run_info.seed))
        m = max(1, int(math.floor(config.loss_subset_fraction * run_info.n_train)))
        self.sample_ids = np.sort(rng.choice(run_info.n_train, size=m,
                                             replace=False))

        self._param_dim: Optional[int] = None
        self._projection = None
        self._weights: list = []
        self._losses: list = []
        self._losses01: list = []
        self._risks: list = []
        self._iterations: list = []
        self._finalized = False
        self.output_path: Optional[Path] = None

    # -- capture -------------------------------------------------------------

    def on_step(self, iteration: int) -> bool:
        """Record ``iteration`` if it lies inside the window.

        Returns True while more recording is expected, False once the
        bundle has been written.
        """
        if self._finalized:
            return False
        if iteration < self.tau:
            return True
        if iteration > self.T:
            self.finalize()
            return False

        self._capture(iteration)
        if iteration == self.T:
            self.finalize()
            return False
        return True

    def _capture(self, iteration: int):
        cfg = self.config
        if cfg.weight_mode != "none":
            vec = np.asarray(self._get_params(), dtype=np.float64).ravel()
            if self._param_dim is None:
                self._param_dim = len(vec)
                if cfg.weight_mode == "projected":
                    dim_out = math.ceil(
                        8.0 * math.log(self.T - self.tau + 1)
                        / cfg.projection_eps ** 2
                    )
                    dim_out = min(dim_out, self._param_dim)
                    self._projection = _sparse_sign_projection(
                        self._param_dim, dim_out, cfg.projection_seed)
            elif len(vec) != self._param_dim:
                raise ShapeDrift(
                    f"parameter count changed from {self._param_dim} "
                    f"to {len(vec)} at iteration {iteration}"
                )
            if cfg.weight_mode == "projected":
                vec = _apply_projection(vec, self._projection)
            self._weights.append(vec.copy())

        if self._eval_subset is not None and (cfg.record_losses or cfg.record_losses01):
            losses, correct = self._eval_subset(self.sample_ids)
            if cfg.record_losses:
                clipped = np.clip(np.asarray(losses, dtype=np.float64),
                                  0.0, self.run_info.loss_bound)
                self._losses.append(clipped)
            if cfg.record_losses01:
                indicator = np.asarray(correct).astype(np.uint8)
                self._losses01.append((1 - indicator).astype(np.uint8))

        if self._eval_risks is not None and \
                (iteration - self.tau) % cfg.risk_eval_period == 0:
            train_risk, test_risk = self._eval_risks()
            self._risks.append((iteration, float(train_risk), float(test_risk)))

        self._iterations.append(int(iteration))

    # -- output --------------------------------------------------------------

    def finalize(self) -> Path:
        """Write the bundle and atomically move it to the target directory."""
        if self._finalized:
            return self.output_path
        if not self._iterations:
            raise WriteFailure("nothing recorded inside the window")

        target = Path(self.config.output_dir)
        scratch = target.with_name(target.name + ".partial")
        try:
            if scratch.exists():
                shutil.rmtree(scratch)
            scratch.mkdir(parents=True)
            self._write_contents(scratch)
            if target.exists():
                shutil.rmtree(target)
            os.replace(scratch, target)
        except OSError as exc:
            raise WriteFailure(f"cannot write bundle at {target}: {exc}") from exc
        self._finalized = True
        self.output_path = target
        return target

    def _write_contents(self, out: Path):
        shapes = {}
        sample_ids = {}
        checksums = {}

        def dump(name, rows, dtype):
            arr = np.ascontiguousarray(np.stack(rows), dtype=dtype)
            with open(out / name, "wb") as fh:
                arr.tofile(fh)
            checksums[name] = _sha256(out / name)
            return [int(x) for x in arr.shape]

        if self._weights:
            shapes["weights"] = dump("weights.f64", self._weights, "<f8")
        if self._losses:
            shapes["losses"] = dump("losses.f64", self._losses, "<f8")
            sample_ids["losses"] = [int(i) for i in self.sample_ids]
        if self._losses01:
            shapes["losses01"] = dump("losses01.u8", self._losses01, "u1")
            sample_ids["losses01"] = [int(i) for i in self.sample_ids]

        with open(out / "risk_history.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "train_risk", "test_risk"])
            for it, tr, te in self._risks:
                writer.writerow([it, repr(tr), repr(te)])
        checksums["risk_history.csv"] = _sha256(out / "risk_history.csv")

        info = self.run_info
        meta = {
            "format_version": 1,
            "run_meta": {
                "learning_rate": info.learning_rate,
                "batch_size": info.batch_size,
                "optimizer": info.optimizer,
                "seed": info.seed,
                "n_train": info.n_train,
                "loss_bound": info.loss_bound,
                "tau": self.tau,
                "T": self.T,
                "dataset": info.dataset,
                "model": info.model,
            },
            "iteration_index": self._iterations,
            "shapes": shapes,
            "sample_ids": sample_ids,
            "checksums": checksums,
            "subsample_fraction": self.config.loss_subset_fraction,
            "recorder": {
                "weight_mode": self.config.weight_mode,
                "risk_eval_period": self.config.risk_eval_period,
            },
        }
        if self.config.weight_mode == "projected":
            meta["recorder"]["projection"] = {
                "eps": self.config.projection_eps,
                "seed": self.config.projection_seed,
                "input_dim": self._param_dim,
                "target_dim": shapes["weights"][1],
            }
        with open(out / "meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


def attach(config: RecorderConfig, run_info: RunInfo, get_flat_params,
           eval_subset=None, eval_risks=None) -> TrajectoryRecorder:
    """Create a recorder handle for a training loop."""
    return TrajectoryRecorder(config, run_info, get_flat_params,
                              eval_subset, eval_risks)
