"""Train a small classifier grid and record every run as a bundle.

One shared pretraining phase brings the model near a minimum of the
training loss; each grid cell then continues from that snapshot with its
own learning rate and batch size while the recorder captures the window.
"""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from .data import two_gaussians
from .mlp import Adam, TwoLayerClassifier
from .recorder import RecorderConfig, RunInfo, TrajectoryRecorder

LOSS_BOUND = 10.0


def _train(model, opt, x, y, steps, batch_size, rng, recorder=None,
           start_iteration=0):
    n = len(x)
    it = start_iteration
    if recorder is not None:
        recorder.on_step(it)  # the starting iterate belongs to the window
    for _ in range(steps):
        batch = rng.integers(0, n, size=batch_size)
        _, grads = model.loss_and_grads(x[batch], y[batch])
        opt.step(grads)
        it += 1
        if recorder is not None:
            recorder.on_step(it)
    return it


def run_grid(output_root, learning_rates=(3e-3, 1e-2, 3e-2),
             batch_sizes=(8, 32, 128), n_train=2000, n_test=1000,
             pretrain_steps=300, window=500, risk_eval_period=100,
             loss_subset_fraction=0.10, hidden=16, seed=0):
    """Record a (learning rate x batch size) grid; returns bundle paths."""
    output_root = Path(output_root)
    output_root.mkdir(parents=True, exist_ok=True)

    x_train, y_train = two_gaussians(n_train, seed=seed)
    x_test, y_test = two_gaussians(n_test, seed=seed + 1)

    # shared pretraining from a fixed init, so every cell starts at the
    # same near-minimum iterate
    base = TwoLayerClassifier(x_train.shape[1], hidden, 2, seed=seed)
    opt = Adam(base.params, lr=1e-2)
    _train(base, opt, x_train, y_train, pretrain_steps, 64,
           np.random.default_rng(seed + 2))
    snapshot = base.flat_params().copy()

    tau = pretrain_steps
    big_t = tau + window - 1
    paths = []
    for i, lr in enumerate(learning_rates):
        for j, bs in enumerate(batch_sizes):
            run_seed = seed + 100 + 10 * i + j
            model = TwoLayerClassifier(x_train.shape[1], hidden, 2, seed=seed)
            model.set_flat_params(snapshot)
            opt = Adam(model.params, lr=lr)
            config = RecorderConfig(
                record_window=(tau, big_t),
                output_dir=str(output_root / f"lr{lr:g}_bs{bs}"),
                loss_subset_fraction=loss_subset_fraction,
                risk_eval_period=risk_eval_period,
            )
            info = RunInfo(
                learning_rate=lr, batch_size=bs, optimizer="adam",
                seed=run_seed, n_train=n_train, loss_bound=LOSS_BOUND,
                dataset="two-gaussians", model=f"mlp-{hidden}",
            )
            recorder = TrajectoryRecorder(
                config, info,
                get_flat_params=model.flat_params,
                eval_subset=lambda ids, m=model: (
                    m.per_sample_loss(x_train[ids], y_train[ids]),
                    m.correct(x_train[ids], y_train[ids]),
                ),
                eval_risks=lambda m=model: (
                    m.error_rate(x_train, y_train),
                    m.error_rate(x_test, y_test),
                ),
            )
            _train(model, opt, x_train, y_train, window - 1, bs,
                   np.random.default_rng(run_seed), recorder=recorder,
                   start_iteration=tau)
            if recorder.output_path is None:
                recorder.finalize()
            paths.append(recorder.output_path)
    return paths


def main():
    parser = argparse.ArgumentParser(
        description="Record a small training grid as trajtopo bundles")
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--window", type=int, default=500)
    parser.add_argument("--n-train", type=int, default=2000)
    args = parser.parse_args()
    paths = run_grid(args.out, seed=args.seed, window=args.window,
                     n_train=args.n_train)
    for p in paths:
        print(p)


if __name__ == "__main__":
    main()
