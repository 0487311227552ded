#!/usr/bin/env python3
"""Run every forecasting strategy on the seeded synthetic benchmark and
print the overall-MSE/MAE comparison table, with per-step error curves
optionally exported as CSV.

Example:
    python3 scripts/run_synthetic_experiments.py --seeds 0 1 2 --out results/
"""

from __future__ import annotations

import argparse
import time
import warnings
from pathlib import Path

import numpy as np

from multistep import cgan, dad, evaluation, nn, strategies, synth
from multistep.data import WindowedDataset, fit_normalizer, make_windows

P = 8
HORIZON = 8


def splits(seed: int, n_train: int, n_val: int = 300, n_test: int = 300):
    series = synth.make_synthetic_series(n_train + n_val + n_test, seed=1000 + seed)
    norm = fit_normalizer(series.values[:n_train])
    v = norm.apply(series.values)
    return v[:n_train], v[n_train : n_train + n_val], v[n_train + n_val :]


def run_seed(seed: int, args) -> dict[str, evaluation.MetricsReport]:
    train, val, test = splits(seed, args.train_points)
    arch = dict(hidden_layers=args.hidden_layers, hidden_units=args.hidden_units)
    base_cfg = nn.TrainConfig(epochs=args.epochs, batch_size=64, seed=seed)
    inner_cfg = nn.TrainConfig(epochs=max(1, args.epochs // 2), batch_size=64, seed=seed)
    test_windows = make_windows(test, P, HORIZON)
    train_windows = make_windows(train, P, HORIZON)

    def score(model, tag):
        return evaluation.evaluate(
            strategies.batch_predictor(model, HORIZON), test_windows, model_tag=tag
        )

    reports: dict[str, evaluation.MetricsReport] = {}
    reports["recursive"] = score(
        strategies.train_recursive(make_windows(train, P, 1), base_cfg, **arch),
        "recursive",
    )

    common = dict(
        p=P,
        n_steps=HORIZON,
        meta_iterations=args.meta_iterations,
        inner_train=inner_cfg,
        base_train=base_cfg,
        **arch,
    )
    reports["dad"] = score(
        dad.train_dad(train, val, dad.DadConfig(**common)).best_model, "dad"
    )
    reports["cdad"] = score(
        dad.train_cdad(train, val, dad.DadConfig(conditional=True, **common)).best_model,
        "cdad",
    )

    for tag, hybrid in (("direct", False), ("hybrid", True)):
        reports[tag] = score(
            strategies.train_direct(train_windows, base_cfg, hybrid=hybrid, **arch), tag
        )

    reports["multi"] = score(
        strategies.train_multi_output(train_windows, base_cfg, **arch), "multi"
    )
    noisy = cgan.noise_augment(
        train_windows, args.noise_sigma, np.random.default_rng((seed, 1))
    )
    reports["multi-noise"] = score(
        strategies.train_multi_output(noisy, base_cfg, **arch), "multi-noise"
    )

    # The slow-discriminator warning is expected: on this small benchmark a
    # faster discriminator wins outright and the generator never catches up.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gan_cfg = cgan.CganConfig(
            noise_dim=8,
            epochs=args.gan_epochs,
            batch_size=64,
            seed=seed,
            hidden_layers=2,
            hidden_units=64,
            lr_generator=2e-3,
            lr_discriminator=2e-4,
        )
    pair = cgan.train_cgan(train_windows, gan_cfg)
    rng = np.random.default_rng((seed, 2))
    synthetic = cgan.generate_pairs(
        pair, cgan.resample_futures(train_windows, len(train_windows), rng), rng
    )
    combined = WindowedDataset(
        np.concatenate([train_windows.histories, synthetic.histories]),
        np.concatenate([train_windows.futures, synthetic.futures]),
        P,
        HORIZON,
    )
    reports["multi-cgan"] = score(
        strategies.train_multi_output(combined, base_cfg, **arch), "multi-cgan"
    )
    return reports


def median_reports(per_seed: list[dict]) -> list[evaluation.MetricsReport]:
    out = []
    for tag in per_seed[0]:
        rs = [d[tag] for d in per_seed]
        out.append(
            evaluation.MetricsReport(
                model_tag=tag,
                overall_mse=float(np.median([r.overall_mse for r in rs])),
                overall_mae=float(np.median([r.overall_mae for r in rs])),
                per_step_mse=list(np.median([r.per_step_mse for r in rs], axis=0)),
                per_step_mae=list(np.median([r.per_step_mae for r in rs], axis=0)),
                num_samples=rs[0].num_samples,
            )
        )
    return out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    parser.add_argument("--train-points", type=int, default=2000)
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--gan-epochs", type=int, default=500)
    parser.add_argument("--meta-iterations", type=int, default=15)
    parser.add_argument("--hidden-layers", type=int, default=2)
    parser.add_argument("--hidden-units", type=int, default=32)
    parser.add_argument("--noise-sigma", type=float, default=0.05)
    parser.add_argument("--out", type=Path, default=None, help="directory for CSV/JSON exports")
    args = parser.parse_args()

    per_seed = []
    for seed in args.seeds:
        t0 = time.time()
        per_seed.append(run_seed(seed, args))
        print(f"seed {seed} done in {time.time() - t0:.1f}s")

    medians = median_reports(per_seed)
    table = evaluation.build_comparison(medians, "recursive")
    text = evaluation.render_comparison_text(table)
    print()
    print(f"Median over seeds {args.seeds} (normalized units):")
    print(text)

    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        evaluation.export_step_curves(medians, args.out / "step_curves.csv")
        for r in medians:
            evaluation.save_report(r, args.out / f"{r.model_tag}.report.json")
        (args.out / "comparison.txt").write_text(text)
        print(f"exports written to {args.out}/")


if __name__ == "__main__":
    main()
