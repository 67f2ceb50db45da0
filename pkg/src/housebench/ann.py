"""Feedforward ReLU regression network trained with Adam.

Plain float64 numpy throughout. The objective is mean squared error plus an
L2 penalty on the weights (biases excluded). Training is full-batch by
default for determinism; mini-batches use seeded shuffling. Early stopping
monitors validation MSE and restores the best epoch's parameters.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class NetworkConfig:
    hidden_layers: int = 2
    units_per_layer: int = 192
    l2_lambda: float = 0.001
    learning_rate: float = 0.001
    max_epochs: int = 100_000
    batch_size: int | None = None  # None = full batch
    early_stop_patience: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.hidden_layers < 0 or self.units_per_layer < 1:
            raise ModelError("network needs units >= 1 and hidden_layers >= 0")
        if self.learning_rate <= 0 or self.l2_lambda < 0:
            raise ModelError("learning rate must be positive and l2_lambda >= 0")
        if self.early_stop_patience < 1:
            raise ModelError("early_stop_patience must be >= 1")


@dataclass
class NetworkState:
    config: NetworkConfig
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    step: int = 0
    history: list[tuple[float, float]] = field(default_factory=list)  # (train loss, val MSE)

    def copy_parameters(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        return [w.copy() for w in self.weights], [b.copy() for b in self.biases]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return forward(self, X)


def init(cfg: NetworkConfig, input_dim: int) -> NetworkState:
    """Seeded scaled-uniform weights with bound sqrt(6/(fan_in+fan_out));
    biases start at zero."""
    if input_dim < 1:
        raise ModelError("input_dim must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    dims = [input_dim] + [cfg.units_per_layer] * cfg.hidden_layers + [1]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkState(
        config=cfg, weights=weights, biases=biases,
        m_w=[np.zeros_like(w) for w in weights],
        v_w=[np.zeros_like(w) for w in weights],
        m_b=[np.zeros_like(b) for b in biases],
        v_b=[np.zeros_like(b) for b in biases],
    )


def _forward_cached(state: NetworkState, X: np.ndarray):
    """Forward pass retaining pre- and post-activation values per layer."""
    acts = [X]
    pre = []
    h = X
    last = len(state.weights) - 1
    for i, (W, b) in enumerate(zip(state.weights, state.biases)):
        z = h @ W + b
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts, pre


def forward(state: NetworkState, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != state.weights[0].shape[0]:
        raise ModelError(
            f"forward: input has {X.shape[1]} columns, network expects "
            f"{state.weights[0].shape[0]}")
    acts, _ = _forward_cached(state, X)
    return acts[-1][:, 0]


def loss(state: NetworkState, X: np.ndarray, y: np.ndarray) -> float:
    """MSE plus l2_lambda * sum of squared weights (biases excluded)."""
    pred = forward(state, X)
    mse = float(np.mean((y - pred) ** 2))
    penalty = state.config.l2_lambda * sum(float(np.sum(W ** 2)) for W in state.weights)
    return mse + penalty


def backward(state: NetworkState, X: np.ndarray, y: np.ndarray):
    """Exact gradients of the penalized loss for every weight and bias.

    ReLU subgradient at exactly zero is taken as zero.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    acts, pre = _forward_cached(state, X)
    pred = acts[-1][:, 0]
    grad_w = [None] * len(state.weights)
    grad_b = [None] * len(state.biases)
    # d(MSE)/d(pred) = 2/n (pred - y)
    delta = (2.0 / n) * (pred - y)[:, None]
    for i in range(len(state.weights) - 1, -1, -1):
        grad_w[i] = acts[i].T @ delta + 2.0 * state.config.l2_lambda * state.weights[i]
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ state.weights[i].T) * (pre[i - 1] > 0.0)
    return grad_w, grad_b


def adam_step(state: NetworkState, grad_w, grad_b) -> None:
    """One in-place Adam update with bias correction."""
    state.step += 1
    t = state.step
    lr = state.config.learning_rate
    c1 = 1.0 - ADAM_BETA1 ** t
    c2 = 1.0 - ADAM_BETA2 ** t
    for i in range(len(state.weights)):
        for params, grads, m, v in (
                (state.weights, grad_w, state.m_w, state.v_w),
                (state.biases, grad_b, state.m_b, state.v_b)):
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grads[i]
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grads[i] ** 2
            params[i] = params[i] - lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + ADAM_EPS)


def train(cfg: NetworkConfig, dm_train, dm_validation) -> NetworkState:
    """Train up to max_epochs with early stopping on validation MSE.

    The parameters of the best validation epoch are restored before
    returning. A non-finite loss aborts with a diagnostic.
    """
    if dm_train.p != dm_validation.p:
        raise ModelError("train/validation designs have different column layouts")
    state = init(cfg, dm_train.p)
    if cfg.max_epochs == 0:
        return state
    X, y = dm_train.X, dm_train.y
    Xv, yv = dm_validation.X, dm_validation.y
    n = X.shape[0]
    rng = np.random.default_rng(cfg.seed + 1)  # mini-batch shuffling only

    best_val = np.inf
    best_params = state.copy_parameters()
    since_best = 0
    for epoch in range(1, cfg.max_epochs + 1):
        if cfg.batch_size is None or cfg.batch_size >= n:
            gw, gb = backward(state, X, y)
            adam_step(state, gw, gb)
        else:
            order = rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                batch = order[start:start + cfg.batch_size]
                gw, gb = backward(state, X[batch], y[batch])
                adam_step(state, gw, gb)
        train_loss = loss(state, X, y)
        val_mse = float(np.mean((yv - forward(state, Xv)) ** 2))
        if not (np.isfinite(train_loss) and np.isfinite(val_mse)):
            raise ModelError(
                f"non-finite loss at epoch {epoch}; try a smaller learning rate "
                f"(current {cfg.learning_rate})")
        state.history.append((train_loss, val_mse))
        if val_mse < best_val:
            best_val = val_mse
            best_params = state.copy_parameters()
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.early_stop_patience:
                break
    state.weights, state.biases = best_params
    return state


def write_history(state: NetworkState, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "validation_mse"])
        for i, (tr, va) in enumerate(state.history, start=1):
            writer.writerow([i, repr(tr), repr(va)])
