"""Dense feed-forward network core.

Explicit forward/backward passes, inverted dropout, MSE loss and Adam,
all in float64 numpy. No autograd framework: gradients are checked
against finite differences in the test suite instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, NumericError, ShapeError

ACTIVATIONS = ("relu", "linear", "sigmoid", "tanh")


@dataclass
class Layer:
    weights: np.ndarray  # [out_dim, in_dim]
    bias: np.ndarray  # [out_dim]
    activation: str = "relu"

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class Mlp:
    layers: list[Layer]
    dropout_rate: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("Mlp needs at least one layer")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        for i, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {layer.activation!r}")
            if layer.bias.shape != (layer.out_dim,):
                raise ShapeError(f"layer {i}: bias shape {layer.bias.shape} != ({layer.out_dim},)")
            if i > 0 and layer.in_dim != self.layers[i - 1].out_dim:
                raise ShapeError(
                    f"layer {i} in_dim {layer.in_dim} != layer {i - 1} out_dim "
                    f"{self.layers[i - 1].out_dim}"
                )
            if not (np.all(np.isfinite(layer.weights)) and np.all(np.isfinite(layer.bias))):
                raise NumericError(f"layer {i} has non-finite parameters")

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def copy(self) -> "Mlp":
        return Mlp(
            layers=[Layer(l.weights.copy(), l.bias.copy(), l.activation) for l in self.layers],
            dropout_rate=self.dropout_rate,
            metadata=dict(self.metadata),
        )


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    seed: int = 0
    dropout_rate: float = 0.0
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must be in [0, 1)")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")


@dataclass
class AdamState:
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def init_mlp(
    dims: Sequence[int],
    dropout_rate: float = 0.0,
    rng: np.random.Generator | int | None = None,
    final_activation: str = "linear",
    hidden_activation: str = "relu",
) -> Mlp:
    """He-style uniform initialization, U(+-sqrt(6/fan_in)), biases zero."""
    if len(dims) < 2:
        raise ConfigError("need at least input and output dims")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    layers = []
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        bound = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = np.zeros(fan_out)
        act = final_activation if i == len(dims) - 2 else hidden_activation
        layers.append(Layer(w, b, act))
    return Mlp(layers, dropout_rate=dropout_rate)


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "linear":
        return z
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if name == "tanh":
        return np.tanh(z)
    raise ConfigError(f"unknown activation {name!r}")


def _activation_grad(name: str, z: np.ndarray, out: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(float)
    if name == "linear":
        return np.ones_like(z)
    if name == "sigmoid":
        return out * (1.0 - out)
    if name == "tanh":
        return 1.0 - out * out
    raise ConfigError(f"unknown activation {name!r}")


@dataclass
class LayerCache:
    inputs: np.ndarray  # [batch, in_dim]
    preact: np.ndarray  # [batch, out_dim]
    act_out: np.ndarray  # activation output before dropout
    mask: np.ndarray | None  # inverted-dropout mask, or None


@dataclass
class ForwardCache:
    layer_caches: list[LayerCache]
    single: bool  # input was a 1-D vector


def forward(
    net: Mlp,
    x: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Run the network. Accepts a single vector or a [batch, in_dim] matrix.

    Dropout (train mode only) uses inverted scaling and is applied to
    hidden-layer outputs, never to the input or the final layer.
    """
    if mode not in ("train", "eval"):
        raise ConfigError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.ndim != 2 or a.shape[1] != net.input_dim:
        raise ShapeError(f"input shape {x.shape} incompatible with input_dim {net.input_dim}")
    if not np.all(np.isfinite(a)):
        raise NumericError("non-finite input")
    use_dropout = mode == "train" and net.dropout_rate > 0.0
    if use_dropout and rng is None:
        raise ConfigError("train-mode forward with dropout requires an rng")

    caches = []
    last = len(net.layers) - 1
    for i, layer in enumerate(net.layers):
        z = a @ layer.weights.T + layer.bias
        h = _activate(layer.activation, z)
        mask = None
        out = h
        if use_dropout and i < last:
            keep = 1.0 - net.dropout_rate
            mask = (rng.random(h.shape) < keep).astype(float) / keep
            out = h * mask
        caches.append(LayerCache(inputs=a, preact=z, act_out=h, mask=mask))
        a = out
    y = a[0] if single else a
    return y, ForwardCache(caches, single)


def backward(
    net: Mlp, cache: ForwardCache, loss_grad: np.ndarray
) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Backpropagate loss_grad (d loss / d output) through the cached pass.

    Returns per-layer (dW, db) pairs plus the gradient w.r.t. the network
    input (needed when chaining networks, e.g. generator through
    discriminator). Batch inputs are summed, so scale loss_grad by 1/batch
    for a mean loss.
    """
    if len(cache.layer_caches) != len(net.layers):
        raise ShapeError("cache does not match network depth")
    g = np.asarray(loss_grad, dtype=float)
    if cache.single:
        g = g[None, :]
    batch = cache.layer_caches[0].inputs.shape[0]
    if g.shape != (batch, net.output_dim):
        raise ShapeError(f"loss_grad shape {loss_grad.shape} incompatible with output")

    grads: list[tuple[np.ndarray, np.ndarray]] = []
    for layer, lc in zip(reversed(net.layers), reversed(cache.layer_caches)):
        if lc.inputs.shape[1] != layer.in_dim or lc.preact.shape[1] != layer.out_dim:
            raise ShapeError("cache does not match layer shapes")
        if lc.mask is not None:
            g = g * lc.mask
        g = g * _activation_grad(layer.activation, lc.preact, lc.act_out)
        grads.append((g.T @ lc.inputs, g.sum(axis=0)))
        g = g @ layer.weights
    grads.reverse()
    input_grad = g[0] if cache.single else g
    return grads, input_grad


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over one vector; grad = 2*(pred-target)/len."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ShapeError(f"pred shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grad = 2.0 * diff / diff.size
    return loss, grad


def net_params(net: Mlp) -> list[np.ndarray]:
    """Flatten to [W0, b0, W1, b1, ...] for the optimizer."""
    out = []
    for layer in net.layers:
        out.append(layer.weights)
        out.append(layer.bias)
    return out


def set_net_params(net: Mlp, params: list[np.ndarray]) -> None:
    for i, layer in enumerate(net.layers):
        layer.weights = params[2 * i]
        layer.bias = params[2 * i + 1]


def init_adam(
    params: list[np.ndarray],
    learning_rate: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
) -> AdamState:
    return AdamState(
        first_moment=[np.zeros_like(p) for p in params],
        second_moment=[np.zeros_like(p) for p in params],
        step_count=0,
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def adam_step(
    params: list[np.ndarray], grads: list[np.ndarray], state: AdamState
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update. Pure: returns fresh arrays and state."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ShapeError("params/grads/state lengths differ")
    for p, g, m in zip(params, grads, state.first_moment):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        new_m.append(m)
        new_v.append(v)
        new_p.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon))
    return new_p, replace(state, first_moment=new_m, second_moment=new_v, step_count=t)


def fit(net: Mlp, dataset, cfg: TrainConfig) -> tuple[Mlp, list[float]]:
    """Mini-batch Adam training on (histories, futures) pairs.

    `dataset` is anything exposing float matrices `histories` [n, input_dim]
    and `futures` [n, output_dim]. Deterministic given cfg.seed; the input
    net is left untouched and a trained copy is returned.
    """
    x = np.asarray(dataset.histories, dtype=float)
    y = np.asarray(dataset.futures, dtype=float)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ShapeError(f"bad dataset shapes {x.shape}, {y.shape}")
    if x.shape[0] == 0:
        raise ConfigError("empty dataset")
    if x.shape[1] != net.input_dim or y.shape[1] != net.output_dim:
        raise ShapeError(
            f"dataset dims ({x.shape[1]}, {y.shape[1]}) != net dims "
            f"({net.input_dim}, {net.output_dim})"
        )

    trained = net.copy()
    if cfg.epochs == 0:
        return trained, []
    rng = np.random.default_rng(cfg.seed)
    params = net_params(trained)
    state = init_adam(params, learning_rate=cfg.learning_rate)
    n = x.shape[0]
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb, yb = x[idx], y[idx]
            pred, cache = forward(trained, xb, mode="train", rng=rng)
            diff = pred - yb
            epoch_loss += float(np.sum(diff * diff)) / yb.shape[1]
            loss_grad = 2.0 * diff / (yb.shape[1] * yb.shape[0])
            grads, _ = backward(trained, cache, loss_grad)
            flat = [g for pair in grads for g in pair]
            params, state = adam_step(params, flat, state)
            set_net_params(trained, params)
        history.append(epoch_loss / n)
    return trained, history
