"""Bagged CART regression forest with per-node feature subsetting.

Trees split on midpoint thresholds between consecutive distinct sorted
values, maximizing variance reduction (parent SSE minus children SSE). Ties
go to the lowest feature index, then the lowest threshold. Each tree owns an
RNG stream derived from (seed, tree index), so a forest is independent of
tree construction order and reproducible under parallel fitting.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError
from .preprocess import DesignMatrix


@dataclass(frozen=True)
class TreeNode:
    """Internal node (feature, threshold, children) or leaf (prediction)."""
    prediction: float
    count: int
    feature: int = -1
    threshold: float = math.nan
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 250
    mtry: int | None = 7  # None = round(p/3)
    max_depth: int | None = None
    min_leaf: int = 5
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ModelError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise ModelError("min_leaf must be >= 1")

    def resolved_mtry(self, p: int) -> int:
        mtry = self.mtry if self.mtry is not None else max(1, round(p / 3))
        if not 1 <= mtry <= p:
            raise ModelError(f"mtry={mtry} outside [1, {p}]")
        return mtry


def best_split(X: np.ndarray, y: np.ndarray, rows: np.ndarray,
               features, min_leaf: int):
    """Best (reduction, feature, threshold) over candidate features.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values; positions leaving a child below min_leaf are skipped. Returns
    None if no admissible split reduces the SSE.
    """
    ysub = y[rows]
    m = ysub.size
    total_sse = float(np.sum((ysub - ysub.mean()) ** 2))
    best = None
    for f in sorted(int(f) for f in features):
        xs = X[rows, f]
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        ys_sorted = ysub[order]
        c1 = np.cumsum(ys_sorted)
        c2 = np.cumsum(ys_sorted ** 2)
        # split position i puts the first i sorted rows on the left
        pos = np.arange(min_leaf, m - min_leaf + 1)
        if pos.size == 0:
            continue
        distinct = xs_sorted[pos - 1] < xs_sorted[pos]
        pos = pos[distinct]
        if pos.size == 0:
            continue
        left_sse = c2[pos - 1] - c1[pos - 1] ** 2 / pos
        s1r = c1[-1] - c1[pos - 1]
        s2r = c2[-1] - c2[pos - 1]
        right_sse = s2r - s1r ** 2 / (m - pos)
        reductions = total_sse - (left_sse + right_sse)
        k = int(np.argmax(reductions))  # first max = lowest threshold
        if reductions[k] <= 0.0:
            continue
        if best is None or reductions[k] > best[0]:
            threshold = 0.5 * (xs_sorted[pos[k] - 1] + xs_sorted[pos[k]])
            best = (float(reductions[k]), f, float(threshold))
    return best


def fit_tree(X: np.ndarray, y: np.ndarray, rows: np.ndarray,
             cfg: ForestConfig, rng: np.random.Generator) -> TreeNode:
    """Grow one CART tree on the given rows (a bootstrap multiset)."""
    rows = np.asarray(rows)
    if rows.size < cfg.min_leaf:
        raise ModelError(f"fit_tree needs at least min_leaf={cfg.min_leaf} rows")
    p = X.shape[1]
    mtry = cfg.resolved_mtry(p)

    def build(node_rows: np.ndarray, depth: int) -> TreeNode:
        ysub = y[node_rows]
        mean = float(ysub.mean())
        if (cfg.max_depth is not None and depth >= cfg.max_depth) \
                or node_rows.size < 2 * cfg.min_leaf or np.ptp(ysub) == 0.0:
            return TreeNode(prediction=mean, count=int(node_rows.size))
        features = rng.choice(p, size=mtry, replace=False)
        found = best_split(X, y, node_rows, features, cfg.min_leaf)
        if found is None:
            return TreeNode(prediction=mean, count=int(node_rows.size))
        _, f, threshold = found
        go_left = X[node_rows, f] <= threshold
        return TreeNode(
            prediction=mean, count=int(node_rows.size),
            feature=f, threshold=threshold,
            left=build(node_rows[go_left], depth + 1),
            right=build(node_rows[~go_left], depth + 1),
        )

    return build(rows, 0)


def tree_predict(root: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])

    def route(node: TreeNode, idx: np.ndarray):
        if node.is_leaf:
            out[idx] = node.prediction
            return
        go_left = X[idx, node.feature] <= node.threshold
        route(node.left, idx[go_left])
        route(node.right, idx[~go_left])

    route(root, np.arange(X.shape[0]))
    return out


@dataclass(frozen=True)
class ForestFit:
    config: ForestConfig
    trees: list[TreeNode]
    bootstrap_indices: list[np.ndarray]  # per-tree draw multiset
    n_train: int
    p: int
    y_min: float
    y_max: float

    def predict(self, X_new: np.ndarray) -> np.ndarray:
        X_new = np.asarray(X_new, dtype=float)
        if X_new.ndim == 1:
            X_new = X_new[None, :]
        if X_new.shape[1] != self.p:
            raise ModelError(
                f"predict: design has {X_new.shape[1]} columns, forest expects {self.p}")
        total = np.zeros(X_new.shape[0])
        for tree in self.trees:
            total += tree_predict(tree, X_new)
        return total / len(self.trees)


def _tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(tree_index,)))


def fit_forest(dm: DesignMatrix, cfg: ForestConfig) -> ForestFit:
    X, y = dm.X, dm.y
    n = X.shape[0]
    trees = []
    bags = []
    for t in range(cfg.n_trees):
        rng = _tree_rng(cfg.seed, t)
        rows = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
        trees.append(fit_tree(X, y, rows, cfg, rng))
        bags.append(rows)
    return ForestFit(config=cfg, trees=trees, bootstrap_indices=bags,
                     n_train=n, p=X.shape[1],
                     y_min=float(y.min()), y_max=float(y.max()))


def predict(fit: ForestFit, X_new: np.ndarray) -> np.ndarray:
    return fit.predict(X_new)


def oob_predictions(fit: ForestFit, dm: DesignMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Per-row out-of-bag mean prediction and a validity mask (rows left out
    by at least one tree)."""
    if not fit.config.bootstrap:
        raise ModelError("out-of-bag error requires bootstrap sampling")
    n = dm.n
    total = np.zeros(n)
    counts = np.zeros(n)
    for tree, bag in zip(fit.trees, fit.bootstrap_indices):
        inbag = np.zeros(n, dtype=bool)
        inbag[bag] = True
        oob = ~inbag
        if not oob.any():
            continue
        total[oob] += tree_predict(tree, dm.X[oob])
        counts[oob] += 1
    valid = counts > 0
    preds = np.full(n, np.nan)
    preds[valid] = total[valid] / counts[valid]
    return preds, valid


def oob_error(fit: ForestFit, dm: DesignMatrix) -> float:
    """MSE of out-of-bag predictions over rows with at least one OOB tree."""
    preds, valid = oob_predictions(fit, dm)
    if not valid.any():
        raise ModelError("no out-of-bag rows; increase n_trees")
    return float(np.mean((dm.y[valid] - preds[valid]) ** 2))


# ---------------------------------------------------------------------------
# interpretation: permutation importance and partial dependence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ImportanceEntry:
    feature: str
    delta_mse: float
    per_repeat: tuple[float, ...] = ()


def permutation_importance(predict_fn, dm_eval: DesignMatrix,
                           repeats: int = 10,
                           rng: np.random.Generator | None = None) -> list[ImportanceEntry]:
    """Increase in MSE after jointly permuting each source feature's columns.

    Model-agnostic: ``predict_fn`` is any X -> predictions callable. Results
    are sorted by decreasing importance.
    """
    if dm_eval.n == 0:
        raise ModelError("permutation importance needs a non-empty evaluation set")
    rng = np.random.default_rng(0) if rng is None else rng
    base_mse = float(np.mean((dm_eval.y - predict_fn(dm_eval.X)) ** 2))
    entries = []
    for feature, cols in dm_eval.feature_groups():
        deltas = []
        for _ in range(repeats):
            perm = rng.permutation(dm_eval.n)
            Xp = dm_eval.X.copy()
            Xp[:, cols] = Xp[np.ix_(perm, cols)]
            mse = float(np.mean((dm_eval.y - predict_fn(Xp)) ** 2))
            deltas.append(mse - base_mse)
        entries.append(ImportanceEntry(feature, float(np.mean(deltas)), tuple(deltas)))
    entries.sort(key=lambda e: -e.delta_mse)
    return entries


def partial_dependence(predict_fn, dm_background: DesignMatrix,
                       feature: str, grid) -> list[tuple[float | str, float]]:
    """Mean prediction as one feature sweeps a grid over the background rows.

    For a numeric feature the grid is a list of design-scale values; for a
    categorical feature it is a list of levels, and all the feature's
    indicator columns are set consistently.
    """
    grid = list(grid)
    if not grid:
        raise ModelError("partial dependence needs a non-empty grid")
    groups = dict(dm_background.feature_groups())
    if feature not in groups:
        raise ModelError(f"feature {feature!r} not present in the design")
    cols = groups[feature]
    level_of = {c.level: j for j, c in enumerate(dm_background.columns)
                if c.source == feature and c.level is not None}
    curve = []
    for v in grid:
        Xg = dm_background.X.copy()
        if len(cols) == 1 and not level_of:
            Xg[:, cols[0]] = float(v)
        else:
            if v not in level_of:
                raise ModelError(f"level {v!r} not encoded for feature {feature!r}")
            Xg[:, cols] = 0.0
            Xg[:, level_of[v]] = 1.0
        curve.append((v, float(np.mean(predict_fn(Xg)))))
    return curve


def write_importance(entries: list[ImportanceEntry], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "delta_mse"])
        for e in entries:
            writer.writerow([e.feature, repr(e.delta_mse)])


def write_pdp(curve, path, feature: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([feature, "mean_prediction"])
        for v, pred in curve:
            writer.writerow([v if isinstance(v, str) else repr(float(v)), repr(pred)])
