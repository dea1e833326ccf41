"""Small feed-forward value approximator written directly on numpy.

Hidden layers are rectified-linear, the output layer is identity, so a spec
with no hidden layers is a pure affine map. Training minimizes a masked mean
squared error: each sample carries a scalar target attached to exactly one
output coordinate (the game state it was computed for); the other coordinates
do not contribute.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths; hidden_dims=() gives a single affine input->output map."""

    input_dim: int
    hidden_dims: Tuple[int, ...]
    output_dim: int

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim <= 0 or self.output_dim <= 0 or any(h <= 0 for h in self.hidden_dims):
            raise ValueError(f"all layer dimensions must be positive: {self}")

    @property
    def layer_dims(self) -> List[int]:
        return [self.input_dim, *self.hidden_dims, self.output_dim]


@dataclass(frozen=True)
class TrainConfig:
    """Adaptive-moment SGD settings for one training call."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 256
    epochs: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


class MlpModel:
    """Weights, biases, and per-coordinate input standardization.

    Inputs are mapped to (x - input_shift) / input_scale before the first
    layer; both vectors default to identity and travel with checkpoints, so a
    saved model reproduces its outputs exactly.
    """

    def __init__(
        self,
        spec: MlpSpec,
        weights: Sequence[np.ndarray],
        biases: Sequence[np.ndarray],
        input_shift: Optional[np.ndarray] = None,
        input_scale: Optional[np.ndarray] = None,
    ):
        dims = spec.layer_dims
        if len(weights) != len(dims) - 1 or len(biases) != len(dims) - 1:
            raise ValueError("parameter count does not match spec")
        for layer, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (dims[layer], dims[layer + 1]) or b.shape != (dims[layer + 1],):
                raise ValueError(f"layer {layer}: shape mismatch against spec {spec}")
        self.spec = spec
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        shift = np.zeros(spec.input_dim) if input_shift is None else np.asarray(input_shift, float)
        scale = np.ones(spec.input_dim) if input_scale is None else np.asarray(input_scale, float)
        if shift.shape != (spec.input_dim,) or scale.shape != (spec.input_dim,):
            raise ValueError("input_shift/input_scale must have input_dim entries")
        if (scale <= 0).any():
            raise ValueError("input_scale entries must be positive")
        self.input_shift = shift.copy()
        self.input_scale = scale.copy()

    @property
    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def copy(self) -> "MlpModel":
        return MlpModel(
            self.spec,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.input_shift,
            self.input_scale,
        )


def init_model(
    spec: MlpSpec,
    rng: np.random.Generator,
    input_shift: Optional[np.ndarray] = None,
    input_scale: Optional[np.ndarray] = None,
) -> MlpModel:
    """He-style init: zero biases, weights ~ Normal(0, 2 / fan_in)."""
    dims = spec.layer_dims
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(spec, weights, biases, input_shift, input_scale)


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Deterministic forward pass; accepts a single input vector or a batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.spec.input_dim:
        raise ValueError(f"expected input dim {model.spec.input_dim}, got {x.shape[1]}")
    h = (x - model.input_shift) / model.input_scale
    last = len(model.weights) - 1
    for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if layer < last:
            np.maximum(h, 0.0, out=h)
    return h[0] if single else h


def _forward_acts(model: MlpModel, x: np.ndarray):
    """Forward pass keeping pre-activations and layer inputs for backprop."""
    h = (x - model.input_shift) / model.input_scale
    inputs = [h]
    preacts = []
    last = len(model.weights) - 1
    for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = h @ w + b
        preacts.append(a)
        h = np.maximum(a, 0.0) if layer < last else a
        if layer < last:
            inputs.append(h)
    return inputs, preacts, h


def masked_loss(model: MlpModel, x: np.ndarray, state_idx: np.ndarray, targets: np.ndarray) -> float:
    """Mean squared error over the masked output coordinates only."""
    out = forward(model, np.atleast_2d(x))
    picked = out[np.arange(out.shape[0]), state_idx]
    return float(np.mean((picked - targets) ** 2))


def gradients(
    model: MlpModel, x: np.ndarray, state_idx: np.ndarray, targets: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray], float]:
    """Analytic backprop through the masked MSE; returns (dW list, db list, loss)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    state_idx = np.asarray(state_idx)
    targets = np.asarray(targets, dtype=float)
    batch = x.shape[0]
    inputs, preacts, out = _forward_acts(model, x)
    rows = np.arange(batch)
    picked = out[rows, state_idx]
    loss = float(np.mean((picked - targets) ** 2))
    grad = np.zeros_like(out)
    grad[rows, state_idx] = 2.0 * (picked - targets) / batch
    d_weights: list[np.ndarray] = [None] * len(model.weights)  # type: ignore[list-item]
    d_biases: list[np.ndarray] = [None] * len(model.biases)  # type: ignore[list-item]
    for layer in range(len(model.weights) - 1, -1, -1):
        d_weights[layer] = inputs[layer].T @ grad
        d_biases[layer] = grad.sum(axis=0)
        if layer > 0:
            grad = grad @ model.weights[layer].T
            grad[preacts[layer - 1] <= 0.0] = 0.0
    return d_weights, d_biases, loss


def train(
    model: MlpModel,
    x: np.ndarray,
    state_idx: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
    rng: Optional[np.random.Generator] = None,
) -> List[float]:
    """Minibatch Adam on the masked MSE; updates the model in place.

    Returns the per-epoch mean training loss (computed from the losses at the
    parameters each batch was evaluated with, so it lags the final fit).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    state_idx = np.asarray(state_idx, dtype=np.int64)
    targets = np.asarray(targets, dtype=float)
    n = x.shape[0]
    if n == 0:
        raise ValueError("training dataset is empty")
    if not np.isfinite(targets).all():
        raise ValueError("targets contain non-finite values")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    m_w = [np.zeros_like(w) for w in model.weights]
    v_w = [np.zeros_like(w) for w in model.weights]
    m_b = [np.zeros_like(b) for b in model.biases]
    v_b = [np.zeros_like(b) for b in model.biases]
    eps = 1e-8
    step = 0
    history: List[float] = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            d_w, d_b, loss = gradients(model, x[batch], state_idx[batch], targets[batch])
            total += loss * batch.size
            step += 1
            c1 = 1.0 - cfg.beta1**step
            c2 = 1.0 - cfg.beta2**step
            for layer in range(len(model.weights)):
                m_w[layer] = cfg.beta1 * m_w[layer] + (1 - cfg.beta1) * d_w[layer]
                v_w[layer] = cfg.beta2 * v_w[layer] + (1 - cfg.beta2) * d_w[layer] ** 2
                model.weights[layer] -= cfg.learning_rate * (m_w[layer] / c1) / (
                    np.sqrt(v_w[layer] / c2) + eps
                )
                m_b[layer] = cfg.beta1 * m_b[layer] + (1 - cfg.beta1) * d_b[layer]
                v_b[layer] = cfg.beta2 * v_b[layer] + (1 - cfg.beta2) * d_b[layer] ** 2
                model.biases[layer] -= cfg.learning_rate * (m_b[layer] / c1) / (
                    np.sqrt(v_b[layer] / c2) + eps
                )
        history.append(total / n)
    return history


def grad_check(
    model: MlpModel,
    x: np.ndarray,
    state_idx: np.ndarray,
    targets: np.ndarray,
    rng: Optional[np.random.Generator] = None,
    n_params: int = 120,
    h: float = 1e-5,
) -> float:
    """Backprop vs central finite differences on a random parameter subset.

    Returns max over sampled parameters of |g_bp - g_fd| / max(1e-8, |g_bp| + |g_fd|).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    d_w, d_b, _ = gradients(model, x, state_idx, targets)
    params = [(("w", layer), model.weights[layer], d_w[layer]) for layer in range(len(d_w))]
    params += [(("b", layer), model.biases[layer], d_b[layer]) for layer in range(len(d_b))]
    flat = [(arr, grad, i) for (_, arr, grad) in params for i in range(arr.size)]
    take = min(max(n_params, 100), len(flat))
    chosen = rng.choice(len(flat), size=take, replace=False)
    worst = 0.0
    for c in chosen:
        arr, grad, i = flat[c]
        orig = arr.flat[i]
        arr.flat[i] = orig + h
        up = masked_loss(model, x, state_idx, targets)
        arr.flat[i] = orig - h
        down = masked_loss(model, x, state_idx, targets)
        arr.flat[i] = orig
        g_fd = (up - down) / (2.0 * h)
        g_bp = grad.flat[i]
        err = abs(g_bp - g_fd) / max(1e-8, abs(g_bp) + abs(g_fd))
        worst = max(worst, err)
    return worst


def save_model(model: MlpModel, path: str | Path) -> None:
    """Write a checkpoint: versioned header, spec dims, standardization, then
    row-major weight/bias arrays per layer (numpy .npz container)."""
    payload = {
        "format_version": np.array(CHECKPOINT_VERSION),
        "input_dim": np.array(model.spec.input_dim),
        "hidden_dims": np.array(model.spec.hidden_dims, dtype=np.int64),
        "output_dim": np.array(model.spec.output_dim),
        "input_shift": model.input_shift,
        "input_scale": model.input_scale,
    }
    for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
        payload[f"w{layer}"] = w
        payload[f"b{layer}"] = b
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_model(path: str | Path) -> MlpModel:
    """Reload a checkpoint; parameters come back byte-identical."""
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        spec = MlpSpec(
            input_dim=int(data["input_dim"]),
            hidden_dims=tuple(int(v) for v in data["hidden_dims"]),
            output_dim=int(data["output_dim"]),
        )
        n_layers = len(spec.layer_dims) - 1
        weights = [data[f"w{layer}"] for layer in range(n_layers)]
        biases = [data[f"b{layer}"] for layer in range(n_layers)]
        return MlpModel(spec, weights, biases, data["input_shift"], data["input_scale"])
