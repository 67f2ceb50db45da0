"""Exact k-nearest-neighbors regression by brute-force distance scan.

Complexity is O(n_train * n_query * p); at the benchmark's scale (about a
thousand rows) an index structure buys nothing. Ties at the k-th neighbor are
broken by ascending training-row index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelError
from .preprocess import DesignMatrix

METRICS = ("euclidean", "manhattan", "minkowski", "chebyshev")


@dataclass(frozen=True)
class KnnConfig:
    k: int = 7
    metric: str = "euclidean"
    minkowski_p: float = 3.0

    def __post_init__(self):
        if self.k < 1:
            raise ModelError("k must be >= 1")
        if self.metric not in METRICS:
            raise ModelError(f"unknown distance metric {self.metric!r}; choose from {METRICS}")
        if self.metric == "minkowski" and self.minkowski_p <= 0:
            raise ModelError("minkowski exponent must be > 0")


def distance(a: np.ndarray, b: np.ndarray, metric: str = "euclidean",
             minkowski_p: float = 3.0) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ModelError(f"distance: shapes differ, {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    if metric == "euclidean":
        return float(np.sqrt(np.sum(diff ** 2)))
    if metric == "manhattan":
        return float(np.sum(diff))
    if metric == "chebyshev":
        return float(diff.max(initial=0.0))
    if metric == "minkowski":
        if minkowski_p <= 0:
            raise ModelError("minkowski exponent must be > 0")
        return float(np.sum(diff ** minkowski_p) ** (1.0 / minkowski_p))
    raise ModelError(f"unknown distance metric {metric!r}")


def _distance_matrix(X_query: np.ndarray, X_train: np.ndarray, cfg: KnnConfig) -> np.ndarray:
    diff = np.abs(X_query[:, None, :] - X_train[None, :, :])
    if cfg.metric == "euclidean":
        return np.sqrt(np.sum(diff ** 2, axis=2))
    if cfg.metric == "manhattan":
        return np.sum(diff, axis=2)
    if cfg.metric == "chebyshev":
        return diff.max(axis=2)
    return np.sum(diff ** cfg.minkowski_p, axis=2) ** (1.0 / cfg.minkowski_p)


@dataclass(frozen=True)
class KnnFit:
    X_train: np.ndarray
    y_train: np.ndarray
    config: KnnConfig

    def predict(self, X_new: np.ndarray) -> np.ndarray:
        X_new = np.asarray(X_new, dtype=float)
        if X_new.ndim == 1:
            X_new = X_new[None, :]
        if X_new.shape[1] != self.X_train.shape[1]:
            raise ModelError(
                f"predict: design has {X_new.shape[1]} columns, fit expects "
                f"{self.X_train.shape[1]}")
        k = self.config.k
        n_train = self.X_train.shape[0]
        if k > n_train:
            raise ModelError(f"k={k} exceeds the {n_train} stored training rows")
        out = np.empty(X_new.shape[0])
        # chunk queries so the distance matrix stays small
        chunk = max(1, 2_000_000 // max(1, n_train))
        for start in range(0, X_new.shape[0], chunk):
            block = X_new[start:start + chunk]
            dists = _distance_matrix(block, self.X_train, self.config)
            # stable sort: equal distances keep ascending training-row order
            nearest = np.argsort(dists, axis=1, kind="stable")[:, :k]
            out[start:start + chunk] = self.y_train[nearest].mean(axis=1)
        return out


def fit(dm: DesignMatrix, cfg: KnnConfig = KnnConfig()) -> KnnFit:
    """Store an immutable copy of the training matrix and targets."""
    if cfg.k > dm.n:
        raise ModelError(f"k={cfg.k} exceeds the {dm.n} training rows")
    X = dm.X.copy()
    y = dm.y.copy()
    X.setflags(write=False)
    y.setflags(write=False)
    return KnnFit(X_train=X, y_train=y, config=cfg)


def predict(fit_: KnnFit, X_new: np.ndarray) -> np.ndarray:
    return fit_.predict(X_new)
