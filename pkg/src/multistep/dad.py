"""Corrective meta-training for recursive models.

The plain variant repeatedly rolls the current model out over the
training series, pairs the drifted synthetic windows with the true next
observations, and retrains on the rebuilt set. The conditioned variant
additionally feeds the model a step-index input so a single network can
learn a different correction per rollout depth. The best iterate is
picked by validation rollout error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data import TimeSeries, WindowedDataset, make_windows
from .errors import AlignmentError, ConfigError
from .nn import Mlp, TrainConfig, fit, forward, init_mlp
from .strategies import PredictionTrajectory, RecursiveModel, rollout


@dataclass
class DadConfig:
    p: int
    n_steps: int  # rollout depth N
    meta_iterations: int  # K
    inner_train: TrainConfig
    conditional: bool = False
    selection_metric: str = "mse"
    hidden_layers: int = 2
    hidden_units: int = 150
    base_train: TrainConfig | None = None
    accumulate: bool = False  # keep synthetic rows from earlier iterations

    def __post_init__(self):
        if self.p < 1:
            raise ConfigError("p must be >= 1")
        if self.n_steps < 1:
            raise ConfigError("n_steps must be >= 1")
        if self.meta_iterations < 1:
            raise ConfigError("meta_iterations must be >= 1")
        if self.selection_metric not in ("mse", "mae"):
            raise ConfigError(f"unknown selection metric {self.selection_metric!r}")


@dataclass
class AugmentedDataset:
    inputs: np.ndarray  # [m, p] or [m, p+1] when conditional
    targets: np.ndarray  # [m]
    tags: np.ndarray  # [m] ints; 0 = original ground-truth pair
    conditional: bool

    def to_windowed(self) -> WindowedDataset:
        return WindowedDataset(
            self.inputs, self.targets[:, None], self.inputs.shape[1], 1
        )

    def __len__(self) -> int:
        return self.inputs.shape[0]


@dataclass
class MetaTrainResult:
    best_model: RecursiveModel
    best_iteration: int
    per_iteration_val_errors: list[tuple[float, float]]  # (mse, mae)

    def to_log_dict(self) -> dict:
        return {
            "iterations": [
                {"k": k, "val_mse": mse, "val_mae": mae}
                for k, (mse, mae) in enumerate(self.per_iteration_val_errors)
            ],
            "best_iteration": self.best_iteration,
        }


def _default_tag_encoder(tag: int, n_steps: int) -> float:
    # Scaled into [0, 1) to match min-max-normalized flow inputs.
    return tag / n_steps


def _series_values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=float)


def _sub_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence((seed, k)).generate_state(1)[0])


def _rollout_aug(
    net: Mlp,
    histories: np.ndarray,
    n_steps: int,
    tag_encoder: Callable[[int, int], float],
) -> np.ndarray:
    """Recursive rollout with the step-index feature appended per step.

    The n-th prediction carries the encoding of tag n-1 (the count of
    already-recycled predictions), so the first step is tagged 0.
    """
    m = histories.shape[0]
    window = histories.copy()
    preds = np.empty((m, n_steps))
    for n in range(1, n_steps + 1):
        v = np.full((m, 1), tag_encoder(n - 1, n_steps))
        out, _ = forward(net, np.concatenate([window, v], axis=1), mode="eval")
        preds[:, n - 1] = out[:, 0]
        window = np.concatenate([window[:, 1:], out], axis=1)
    return preds


def _synthetic_rows(
    values: np.ndarray,
    p: int,
    start_indices: np.ndarray,
    preds: np.ndarray,
    n_steps: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Windows ending in the n-th prediction, paired with the true next value.

    Usable tags are 1..n_steps-1: the window ending in the final prediction
    has no ground-truth successor inside the rollout span.
    """
    xs, ys, tags = [], [], []
    for n in range(1, n_steps):
        gt_part = np.stack([values[s + n : s + p] for s in start_indices]) if n < p else None
        if n < p:
            window = np.concatenate([gt_part, preds[:, :n]], axis=1)
        else:
            window = preds[:, n - p : n]
        xs.append(window)
        ys.append(values[start_indices + p + n])
        tags.append(np.full(len(start_indices), n, dtype=int))
    if not xs:
        return np.empty((0, p)), np.empty(0), np.empty(0, dtype=int)
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(tags)


def build_augmented_dataset(
    series,
    p: int,
    trajectories: Sequence[PredictionTrajectory],
    conditional: bool,
    n_steps: int,
    tag_encoder: Callable[[int, int], float] | None = None,
) -> AugmentedDataset:
    """Original one-step pairs (tag 0) plus rollout-derived synthetic pairs.

    Trajectory i must start at a window position with n_steps true
    successors; every trajectory must be exactly n_steps long.
    """
    values = _series_values(series)
    if tag_encoder is None:
        tag_encoder = _default_tag_encoder
    one_step = make_windows(values, p, 1)
    x0 = one_step.histories
    y0 = one_step.futures[:, 0]
    t0 = np.zeros(len(one_step), dtype=int)

    starts = np.array([t.start_index for t in trajectories], dtype=int)
    if len(starts):
        preds = np.stack([t.values for t in trajectories])
        if preds.shape[1] != n_steps:
            raise AlignmentError(
                f"trajectory length {preds.shape[1]} != n_steps {n_steps}"
            )
        if starts.min() < 0 or starts.max() + p + n_steps > len(values):
            raise AlignmentError("trajectory start index out of range for the series")
        xs, ys, ts = _synthetic_rows(values, p, starts, preds, n_steps)
    else:
        xs, ys, ts = np.empty((0, p)), np.empty(0), np.empty(0, dtype=int)

    inputs = np.concatenate([x0, xs])
    targets = np.concatenate([y0, ys])
    tags = np.concatenate([t0, ts])
    if conditional:
        encoded = np.array([tag_encoder(int(t), n_steps) for t in tags])
        inputs = np.concatenate([inputs, encoded[:, None]], axis=1)
    return AugmentedDataset(inputs, targets, tags, conditional)


def _score(preds: np.ndarray, truth: np.ndarray) -> tuple[float, float]:
    err = preds - truth
    return float(np.mean(err * err)), float(np.mean(np.abs(err)))


def select_best(
    results: Sequence[tuple[object, float, float]], metric: str = "mse"
) -> tuple[object, int]:
    """Argmin by validation metric; ties break toward the earliest index."""
    if not results:
        raise ConfigError("no candidates to select from")
    col = 1 if metric == "mse" else 2
    best = min(range(len(results)), key=lambda i: results[i][col])
    return results[best][0], best


def _inner_cfg(cfg: TrainConfig, seed: int) -> TrainConfig:
    return TrainConfig(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        seed=seed,
        dropout_rate=cfg.dropout_rate,
        learning_rate=cfg.learning_rate,
    )


def _meta_train(
    train_series,
    val_series,
    cfg: DadConfig,
    m0_net: Mlp | None = None,
    tag_encoder: Callable[[int, int], float] | None = None,
) -> MetaTrainResult:
    train_values = _series_values(train_series)
    val_values = _series_values(val_series)
    p, n_steps, big_k = cfg.p, cfg.n_steps, cfg.meta_iterations
    if tag_encoder is None:
        tag_encoder = _default_tag_encoder
    base_cfg = cfg.base_train if cfg.base_train is not None else cfg.inner_train
    seed = cfg.inner_train.seed
    hidden = [cfg.hidden_units] * cfg.hidden_layers

    one_step = make_windows(train_values, p, 1)
    roll_windows = make_windows(train_values, p, n_steps)
    val_windows = make_windows(val_values, p, n_steps)

    base_net = init_mlp(
        [p, *hidden, 1],
        dropout_rate=base_cfg.dropout_rate,
        rng=np.random.default_rng(_sub_seed(seed, 0)),
    )
    base_net, _ = fit(base_net, one_step, _inner_cfg(base_cfg, _sub_seed(seed, 1)))
    starts = np.arange(len(roll_windows))

    def build(preds: np.ndarray, synthetic_bank: list | None) -> WindowedDataset:
        trajectories = [
            PredictionTrajectory(int(s), preds[i]) for i, s in enumerate(starts)
        ]
        aug = build_augmented_dataset(
            train_values, p, trajectories, cfg.conditional, n_steps, tag_encoder
        )
        if synthetic_bank is None:
            return aug.to_windowed()
        mask = aug.tags > 0
        synthetic_bank.append((aug.inputs[mask], aug.targets[mask]))
        inputs = np.concatenate([aug.inputs[~mask]] + [b[0] for b in synthetic_bank])
        targets = np.concatenate([aug.targets[~mask]] + [b[1] for b in synthetic_bank])
        return WindowedDataset(inputs, targets[:, None], inputs.shape[1], 1)

    bank: list | None = [] if cfg.accumulate else None
    candidates: list[tuple[Mlp, float, float]] = []

    if not cfg.conditional:
        mse, mae = _score(
            rollout(base_net, val_windows.histories, n_steps), val_windows.futures
        )
        candidates.append((base_net, mse, mae))
        current = base_net
        for k in range(1, big_k + 1):
            preds = rollout(current, roll_windows.histories, n_steps)
            d_aug = build(preds, bank)
            current, _ = fit(current, d_aug, _inner_cfg(cfg.inner_train, _sub_seed(seed, 10 + k)))
            mse, mae = _score(
                rollout(current, val_windows.histories, n_steps), val_windows.futures
            )
            candidates.append((current, mse, mae))
    else:
        preds = rollout(base_net, roll_windows.histories, n_steps)
        d_aug = build(preds, bank)
        current = m0_net if m0_net is not None else init_mlp(
            [p + 1, *hidden, 1],
            dropout_rate=cfg.inner_train.dropout_rate,
            rng=np.random.default_rng(_sub_seed(seed, 2)),
        )
        # M_0 starts from scratch (its input width differs from the base
        # model's), so it gets the base training budget, not the fine-tune one.
        current, _ = fit(current, d_aug, _inner_cfg(base_cfg, _sub_seed(seed, 10)))
        mse, mae = _score(
            _rollout_aug(current, val_windows.histories, n_steps, tag_encoder),
            val_windows.futures,
        )
        candidates.append((current, mse, mae))
        for k in range(1, big_k + 1):
            preds = _rollout_aug(current, roll_windows.histories, n_steps, tag_encoder)
            d_aug = build(preds, bank)
            current, _ = fit(current, d_aug, _inner_cfg(cfg.inner_train, _sub_seed(seed, 10 + k)))
            mse, mae = _score(
                _rollout_aug(current, val_windows.histories, n_steps, tag_encoder),
                val_windows.futures,
            )
            candidates.append((current, mse, mae))

    best_net, best_idx = select_best(candidates, cfg.selection_metric)
    model = RecursiveModel(
        best_net,
        p=p,
        time_step_augmented=cfg.conditional,
        max_step=n_steps if cfg.conditional else None,
    )
    return MetaTrainResult(
        best_model=model,
        best_iteration=best_idx,
        per_iteration_val_errors=[(mse, mae) for _, mse, mae in candidates],
    )


def train_dad(train_series, val_series, cfg: DadConfig) -> MetaTrainResult:
    if cfg.conditional:
        raise ConfigError("cfg.conditional must be False for train_dad")
    return _meta_train(train_series, val_series, cfg)


def train_cdad(
    train_series,
    val_series,
    cfg: DadConfig,
    m0_net: Mlp | None = None,
    tag_encoder: Callable[[int, int], float] | None = None,
) -> MetaTrainResult:
    if not cfg.conditional:
        raise ConfigError("cfg.conditional must be True for train_cdad")
    return _meta_train(train_series, val_series, cfg, m0_net=m0_net, tag_encoder=tag_encoder)
