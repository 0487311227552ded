"""Conditional-GAN data augmentation for multi-output training.

The generator learns to produce history windows conditioned on future
windows; generated (history, future) pairs are appended to the real
training set. A Gaussian noise-on-histories augmentation is included as
the baseline it is compared against.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import WindowedDataset
from .errors import ConfigError, ShapeError
from .nn import (
    Mlp,
    backward,
    forward,
    init_adam,
    init_mlp,
    adam_step,
    net_params,
    set_net_params,
)

PROB_EPS = 1e-7  # clamp for log arguments


@dataclass
class CganConfig:
    noise_dim: int = 16
    lr_discriminator: float = 2e-4
    lr_generator: float = 1e-4
    epochs: int = 200
    batch_size: int = 64
    seed: int = 0
    hidden_layers: int = 2
    hidden_units: int = 150
    dropout: float = 0.0
    saturating: bool = False  # literal log(1-D) generator objective

    def __post_init__(self):
        if self.noise_dim < 1:
            raise ConfigError("noise_dim must be >= 1")
        if self.lr_discriminator <= 0 or self.lr_generator <= 0:
            raise ConfigError("learning rates must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.lr_discriminator < self.lr_generator:
            warnings.warn(
                "discriminator learning rate below generator's; the "
                "discriminator is usually configured to learn faster",
                stacklevel=2,
            )


@dataclass
class CganPair:
    generator: Mlp  # [noise_dim + q] -> p, linear output
    discriminator: Mlp  # [p + q] -> 1, sigmoid output
    noise_dim: int
    p: int
    q: int
    training_log: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.generator.input_dim != self.noise_dim + self.q:
            raise ShapeError("generator input_dim != noise_dim + q")
        if self.generator.output_dim != self.p:
            raise ShapeError("generator output_dim != p")
        if self.discriminator.input_dim != self.p + self.q:
            raise ShapeError("discriminator input_dim != p + q")
        if self.discriminator.output_dim != 1:
            raise ShapeError("discriminator output_dim != 1")


def _clamp(prob: np.ndarray) -> np.ndarray:
    return np.clip(prob, PROB_EPS, 1.0 - PROB_EPS)


def train_cgan(
    data: WindowedDataset, cfg: CganConfig, holdout: WindowedDataset | None = None
) -> CganPair:
    """Alternating discriminator/generator updates on (history, future) pairs.

    Discriminator: binary cross-entropy on real pairs vs generated ones.
    Generator: non-saturating -log D(G(z, y), y) by default. Fresh standard
    normal z per sample. Deterministic given cfg.seed.

    With `holdout` given, the per-epoch d_accuracy in the training log is
    computed on that set (plus an equal number of generated fakes) instead
    of on the training batches.
    """
    if len(data) == 0:
        raise ConfigError("empty dataset")
    p, q = data.p, data.q
    rng = np.random.default_rng(cfg.seed)
    hidden = [cfg.hidden_units] * cfg.hidden_layers
    gen = init_mlp([cfg.noise_dim + q, *hidden, p], dropout_rate=cfg.dropout, rng=rng)
    disc = init_mlp(
        [p + q, *hidden, 1],
        dropout_rate=cfg.dropout,
        rng=rng,
        final_activation="sigmoid",
    )
    g_params = net_params(gen)
    d_params = net_params(disc)
    g_state = init_adam(g_params, learning_rate=cfg.lr_generator)
    d_state = init_adam(d_params, learning_rate=cfg.lr_discriminator)

    n = len(data)
    log: list[dict] = []
    eval_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0x60DA)))
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        d_losses, g_losses, acc_hits, acc_total = [], [], 0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            real_h, futures = data.histories[idx], data.futures[idx]
            b = len(idx)

            # --- discriminator update ---
            z = rng.standard_normal((b, cfg.noise_dim))
            fake_h, _ = forward(gen, np.concatenate([z, futures], axis=1), mode="eval")
            d_real, cache_r = forward(
                disc, np.concatenate([real_h, futures], axis=1), mode="train", rng=rng
            )
            d_fake, cache_f = forward(
                disc, np.concatenate([fake_h, futures], axis=1), mode="train", rng=rng
            )
            pr, pf = _clamp(d_real), _clamp(d_fake)
            d_loss = float(-np.mean(np.log(pr)) - np.mean(np.log(1.0 - pf)))
            grad_r = -1.0 / (pr * b)
            grad_f = 1.0 / ((1.0 - pf) * b)
            grads_r, _ = backward(disc, cache_r, grad_r)
            grads_f, _ = backward(disc, cache_f, grad_f)
            flat = [gr + gf for gr, gf in zip(
                (g for pair in grads_r for g in pair),
                (g for pair in grads_f for g in pair),
            )]
            d_params, d_state = adam_step(d_params, flat, d_state)
            set_net_params(disc, d_params)

            # --- generator update ---
            z = rng.standard_normal((b, cfg.noise_dim))
            fake_h, cache_g = forward(
                gen, np.concatenate([z, futures], axis=1), mode="train", rng=rng
            )
            d_out, cache_d = forward(
                disc, np.concatenate([fake_h, futures], axis=1), mode="eval"
            )
            pg = _clamp(d_out)
            if cfg.saturating:
                g_loss = float(np.mean(np.log(1.0 - pg)))
                grad_out = -1.0 / ((1.0 - pg) * b)
            else:
                g_loss = float(-np.mean(np.log(pg)))
                grad_out = -1.0 / (pg * b)
            _, d_input_grad = backward(disc, cache_d, grad_out)
            g_grads, _ = backward(gen, cache_g, d_input_grad[:, :p])
            flat = [g for pair in g_grads for g in pair]
            g_params, g_state = adam_step(g_params, flat, g_state)
            set_net_params(gen, g_params)

            d_losses.append(d_loss)
            g_losses.append(g_loss)
            acc_hits += int(np.sum(d_real[:, 0] > 0.5)) + int(np.sum(d_fake[:, 0] <= 0.5))
            acc_total += 2 * b
        epoch_acc = acc_hits / acc_total
        if holdout is not None:
            snapshot = CganPair(gen, disc, cfg.noise_dim, p, q)
            epoch_acc = discriminator_accuracy(snapshot, holdout, len(holdout), eval_rng)
        log.append(
            {
                "d_loss": float(np.mean(d_losses)),
                "g_loss": float(np.mean(g_losses)),
                "d_accuracy": epoch_acc,
            }
        )
    return CganPair(gen, disc, cfg.noise_dim, p, q, training_log=log)


def discriminator_accuracy(
    pair: CganPair,
    data: WindowedDataset,
    num_fakes: int,
    rng: np.random.Generator,
) -> float:
    """Fraction of correct real/fake calls at threshold 0.5 (real iff D > 0.5)."""
    if num_fakes < 1:
        raise ConfigError("num_fakes must be >= 1")
    real_in = np.concatenate([data.histories, data.futures], axis=1)
    d_real, _ = forward(pair.discriminator, real_in, mode="eval")
    futures = data.futures[rng.integers(0, len(data), size=num_fakes)]
    fakes = generate_pairs(pair, futures, rng)
    fake_in = np.concatenate([fakes.histories, fakes.futures], axis=1)
    d_fake, _ = forward(pair.discriminator, fake_in, mode="eval")
    hits = int(np.sum(d_real[:, 0] > 0.5)) + int(np.sum(d_fake[:, 0] <= 0.5))
    return hits / (len(data) + num_fakes)


def generate_pairs(
    pair: CganPair, futures: np.ndarray, rng: np.random.Generator
) -> WindowedDataset:
    """Sample one history per future row: (G(z, future), future).

    Generator output is clamped to [0, 1] on emission since the data it
    imitates is min-max normalized.
    """
    futures = np.asarray(futures, dtype=float)
    if futures.ndim != 2 or futures.shape[1] != pair.q:
        raise ShapeError(f"futures shape {futures.shape} != [m, q={pair.q}]")
    m = futures.shape[0]
    if m == 0:
        return WindowedDataset(np.empty((0, pair.p)), np.empty((0, pair.q)), pair.p, pair.q)
    z = rng.standard_normal((m, pair.noise_dim))
    histories, _ = forward(pair.generator, np.concatenate([z, futures], axis=1), mode="eval")
    return WindowedDataset(np.clip(histories, 0.0, 1.0), futures, pair.p, pair.q)


def resample_futures(
    data: WindowedDataset, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Futures drawn uniformly with replacement from the real training set."""
    if count == 0:
        return np.empty((0, data.q))
    return data.futures[rng.integers(0, len(data), size=count)]


def noise_augment(
    data: WindowedDataset,
    sigma: float,
    rng: np.random.Generator,
    interpret_as_stddev: bool = True,
) -> WindowedDataset:
    """Original rows plus copies whose histories carry N(0, sigma^2) noise.

    Futures stay exact. With interpret_as_stddev=False, sigma is taken as
    a variance and the standard deviation used is sqrt(sigma).
    """
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    std = sigma if interpret_as_stddev else float(np.sqrt(sigma))
    noisy = data.histories + rng.normal(0.0, std, size=data.histories.shape)
    histories = np.concatenate([data.histories, noisy])
    futures = np.concatenate([data.futures, data.futures])
    return WindowedDataset(histories, futures, data.p, data.q)
