"""Minimal feed-forward networks with sigmoid hidden layers and a linear
scalar output, trained by plain minibatch gradient descent.

These small nets approximate the objective Q-function and each constraint
Q-function. Everything is numpy; no autodiff framework.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DivergenceError(RuntimeError):
    """Raised when training produces non-finite parameters or loss."""


@dataclass(frozen=True)
class LayerSpec:
    """Layer widths (input, hidden..., output). Output width must be 1."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if len(sizes) < 3:
            raise ValueError("need at least one hidden layer: (in, hidden..., out)")
        if any(s < 1 for s in sizes):
            raise ValueError(f"all layer sizes must be >= 1, got {sizes}")
        if sizes[-1] != 1:
            raise ValueError(f"output width must be 1, got {sizes[-1]}")

    @property
    def input_width(self) -> int:
        return self.sizes[0]


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent settings for one `fit` call."""

    learning_rate: float = 0.15
    epochs: int = 50
    batch_size: int = 32
    init_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class MlpParams:
    """Weights/biases for a LayerSpec; weights[i] has shape (out, in)."""

    spec: LayerSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    init_seed: int = 0

    def copy(self) -> "MlpParams":
        return MlpParams(
            self.spec,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.init_seed,
        )


@dataclass(frozen=True)
class LabeledDataset:
    """Training pairs: inputs (n, d) and scalar targets (n,)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.targets, dtype=float).ravel()
        if x.ndim != 2:
            raise ValueError(f"inputs must be 2-D (n, d), got shape {x.shape}")
        if len(x) != len(y):
            raise ValueError(f"{len(x)} inputs vs {len(y)} targets")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    def __len__(self) -> int:
        return len(self.targets)


def init_params(spec: LayerSpec, cfg: TrainConfig) -> MlpParams:
    """Seeded init: weights uniform in [-0.5, 0.5]/sqrt(fan_in), biases zero."""
    rng = np.random.default_rng(cfg.seed)
    weights, biases = [], []
    for n_in, n_out in zip(spec.sizes[:-1], spec.sizes[1:]):
        scale = cfg.init_scale / np.sqrt(n_in)
        weights.append(rng.uniform(-0.5, 0.5, size=(n_out, n_in)) * scale)
        biases.append(np.zeros(n_out))
    return MlpParams(spec, weights, biases, init_seed=cfg.seed)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def _check_input(params: MlpParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.spec.input_width:
        raise ValueError(
            f"input width {x.shape[-1]} != network input width {params.spec.input_width}"
        )
    return x


def forward_many(params: MlpParams, inputs: np.ndarray) -> np.ndarray:
    """Evaluate the network on a batch of rows; returns shape (n,)."""
    a = _check_input(params, np.atleast_2d(inputs))
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        a = _sigmoid(a @ w.T + b)
    return (a @ params.weights[-1].T + params.biases[-1]).ravel()


def forward(params: MlpParams, x: np.ndarray) -> float:
    """Evaluate the network on a single input vector."""
    return float(forward_many(params, np.asarray(x, dtype=float)[None, :])[0])


def hidden_activations(params: MlpParams, x: np.ndarray) -> list[np.ndarray]:
    """Post-sigmoid activations of each hidden layer for one input."""
    a = _check_input(params, np.asarray(x, dtype=float))
    acts = []
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        a = _sigmoid(a @ w.T + b)
        acts.append(a)
    return acts


def _backprop(params: MlpParams, x: np.ndarray, y: np.ndarray):
    """Batch gradient of mean squared error; returns (grads, predictions).

    grads is a list of (dW, db) matching params. Loss is
    mean_j (pred_j - y_j)^2, so a single sample yields the plain squared
    error gradient.
    """
    n = len(x)
    with np.errstate(over="ignore", invalid="ignore"):
        acts = [x]
        a = x
        for w, b in zip(params.weights[:-1], params.biases[:-1]):
            a = _sigmoid(a @ w.T + b)
            acts.append(a)
        pred = (a @ params.weights[-1].T + params.biases[-1]).ravel()

        delta = (2.0 * (pred - y) / n)[:, None]  # (n, 1)
        grads: list[tuple[np.ndarray, np.ndarray]] = []
        for layer in range(len(params.weights) - 1, -1, -1):
            dw = delta.T @ acts[layer]
            db = delta.sum(axis=0)
            grads.append((dw, db))
            if layer > 0:
                a_prev = acts[layer]
                delta = (delta @ params.weights[layer]) * a_prev * (1.0 - a_prev)
    grads.reverse()
    return grads, pred


def gradient(params: MlpParams, x: np.ndarray, target: float):
    """Gradient of (forward(params, x) - target)^2 w.r.t. every parameter."""
    x2 = _check_input(params, np.asarray(x, dtype=float)[None, :])
    grads, _ = _backprop(params, x2, np.array([float(target)]))
    return grads


def fit(
    params: MlpParams, data: LabeledDataset, cfg: TrainConfig
) -> tuple[MlpParams, np.ndarray]:
    """Minibatch gradient descent for cfg.epochs passes over `data`.

    Returns updated parameters and the per-sample residuals
    (prediction - target) under the final parameters. Deterministic given
    cfg.seed and the dataset order.
    """
    if len(data) == 0:
        raise ValueError("cannot fit on an empty dataset")
    x = _check_input(params, data.inputs)
    y = data.targets
    out = params.copy()
    rng = np.random.default_rng(cfg.seed)
    n = len(y)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            grads, pred = _backprop(out, x[idx], y[idx])
            if not np.all(np.isfinite(pred)):
                raise DivergenceError("non-finite predictions during training")
            for (dw, db), w, b in zip(grads, out.weights, out.biases):
                w -= cfg.learning_rate * dw
                b -= cfg.learning_rate * db
    residuals = forward_many(out, x) - y
    if not np.all(np.isfinite(residuals)):
        raise DivergenceError("training diverged: non-finite residuals")
    return out, residuals


def save_params(params: MlpParams, path) -> None:
    """Plain-text snapshot: layer-size count, sizes, then row-major W and b
    per layer, one value per line. Debug/reload only."""
    with open(path, "w") as fh:
        fh.write(f"{len(params.spec.sizes)}\n")
        for s in params.spec.sizes:
            fh.write(f"{s}\n")
        for w, b in zip(params.weights, params.biases):
            for v in w.ravel():
                fh.write(f"{float(v)!r}\n")
            for v in b:
                fh.write(f"{float(v)!r}\n")


def load_params(path) -> MlpParams:
    with open(path) as fh:
        values = [line.strip() for line in fh if line.strip()]
    n_sizes = int(values[0])
    sizes = tuple(int(v) for v in values[1 : 1 + n_sizes])
    spec = LayerSpec(sizes)
    flat = np.array([float(v) for v in values[1 + n_sizes :]])
    weights, biases = [], []
    pos = 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        weights.append(flat[pos : pos + n_in * n_out].reshape(n_out, n_in))
        pos += n_in * n_out
        biases.append(flat[pos : pos + n_out])
        pos += n_out
    if pos != len(flat):
        raise ValueError(f"snapshot has {len(flat)} values, expected {pos}")
    return MlpParams(spec, weights, biases)
