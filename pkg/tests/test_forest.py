"""Regression trees and bagged forests: splits, OOB, importance, PDP."""

import numpy as np
import pytest

from housebench import forest
from housebench.errors import ModelError
from housebench.forest import ForestConfig
from housebench.preprocess import ColumnProvenance, DesignMatrix


def make_design(X, y, names=None, levels=None):
    names = names or [f"x{j}" for j in range(X.shape[1])]
    cols = []
    for j, name in enumerate(names):
        level = levels[j] if levels else None
        source = name.split("=")[0] if level else name
        cols.append(ColumnProvenance(name, source, level))
    return DesignMatrix(np.asarray(X, float), np.asarray(y, float), cols,
                        intercept=False)


def friedman_design(rng, n):
    X = rng.uniform(size=(n, 5))
    y = (10 * np.sin(np.pi * X[:, 0] * X[:, 1]) + 20 * (X[:, 2] - 0.5) ** 2
         + 10 * X[:, 3] + 5 * X[:, 4] + rng.normal(scale=0.5, size=n))
    return make_design(X, y)


# -- split search ---------------------------------------------------------------

def test_best_split_finds_step_midpoint():
    X = np.array([[1.0], [2.0], [3.0], [10.0], [11.0], [12.0]])
    y = np.array([0.0, 0.0, 0.0, 5.0, 5.0, 5.0])
    rows = np.arange(6)
    red, feat, thr = forest.best_split(X, y, rows, features=np.array([0]),
                                       min_leaf=1)
    assert feat == 0
    assert thr == pytest.approx(6.5)  # midpoint of 3 and 10
    assert red == pytest.approx(np.sum((y - y.mean()) ** 2))


def test_best_split_tie_prefers_lowest_feature_index():
    X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    y = np.array([0.0, 0.0, 4.0, 4.0])
    red, feat, thr = forest.best_split(X, y, np.arange(4),
                                       features=np.array([1, 0]), min_leaf=1)
    assert feat == 0
    assert thr == pytest.approx(0.5)


def test_best_split_respects_min_leaf():
    X = np.arange(6.0)[:, None]
    y = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 10.0])
    out = forest.best_split(X, y, np.arange(6), features=np.array([0]),
                            min_leaf=2)
    _, _, thr = out
    # the natural cut between rows 4 and 5 leaves one row; with min_leaf=2
    # the right child must keep at least two rows
    assert thr <= 3.5


def test_best_split_returns_none_without_usable_cut():
    X = np.ones((4, 1))
    y = np.array([1.0, 2.0, 3.0, 4.0])
    assert forest.best_split(X, y, np.arange(4), features=np.array([0]),
                             min_leaf=1) is None


# -- single tree ------------------------------------------------------------------

def test_tree_pure_node_becomes_leaf():
    X = np.arange(8.0)[:, None]
    y = np.ones(8)
    root = forest.fit_tree(X, y, np.arange(8), ForestConfig(n_trees=1, mtry=1,
                           min_leaf=1), rng=np.random.default_rng(0))
    assert root.is_leaf
    assert root.prediction == 1.0


def test_tree_routes_boundary_values_left():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0.0, 0.0, 9.0, 9.0])
    root = forest.fit_tree(X, y, np.arange(4),
                           ForestConfig(n_trees=1, mtry=1, max_depth=1, min_leaf=1),
                           rng=np.random.default_rng(0))
    assert not root.is_leaf
    # a query exactly at the threshold goes to the left child
    assert forest.tree_predict(root, np.array([[root.threshold]]))[0] == 0.0


def test_tree_interpolates_piecewise_constant():
    rng = np.random.default_rng(1)
    X = rng.uniform(size=(200, 1))
    y = np.where(X[:, 0] < 0.5, 1.0, 3.0)
    root = forest.fit_tree(X, y, np.arange(200),
                           ForestConfig(n_trees=1, mtry=1, min_leaf=5), rng=rng)
    pred = forest.tree_predict(root, np.array([[0.1], [0.9]]))
    assert pred == pytest.approx([1.0, 3.0])


# -- forest ------------------------------------------------------------------------

def test_forest_is_seeded_and_tree_order_independent():
    rng = np.random.default_rng(2)
    dm = friedman_design(rng, 120)
    a = forest.fit_forest(dm, ForestConfig(n_trees=6, mtry=None, seed=9))
    b = forest.fit_forest(dm, ForestConfig(n_trees=6, mtry=None, seed=9))
    wide = forest.fit_forest(dm, ForestConfig(n_trees=12, mtry=None, seed=9))
    assert np.array_equal(a.predict(dm.X), b.predict(dm.X))
    # tree t draws from its own child stream, so the first trees of a larger
    # forest coincide with the smaller forest's trees
    for t in range(6):
        assert np.array_equal(a.bootstrap_indices[t], wide.bootstrap_indices[t])
        assert np.array_equal(forest.tree_predict(a.trees[t], dm.X),
                              forest.tree_predict(wide.trees[t], dm.X))


def test_forest_prediction_is_tree_average():
    rng = np.random.default_rng(3)
    dm = friedman_design(rng, 100)
    fit = forest.fit_forest(dm, ForestConfig(n_trees=5, mtry=None, seed=4))
    stacked = np.stack([forest.tree_predict(t, dm.X) for t in fit.trees])
    assert np.allclose(fit.predict(dm.X), stacked.mean(axis=0))


def test_mtry_default_is_p_over_three():
    assert ForestConfig(mtry=None).resolved_mtry(9) == 3
    assert ForestConfig(mtry=None).resolved_mtry(2) == 1
    assert ForestConfig(mtry=5).resolved_mtry(9) == 5
    with pytest.raises(ModelError):
        ForestConfig(mtry=5).resolved_mtry(4)


def test_oob_predictions_and_error():
    rng = np.random.default_rng(5)
    dm = friedman_design(rng, 150)
    fit = forest.fit_forest(dm, ForestConfig(n_trees=60, mtry=None, seed=6))
    pred, covered = forest.oob_predictions(fit, dm)
    assert covered.all()  # 60 bootstraps leave every row out at least once
    err = forest.oob_error(fit, dm)
    assert 0 < err < float(np.var(dm.y)) * 2


def test_oob_requires_bootstrap():
    rng = np.random.default_rng(6)
    dm = friedman_design(rng, 80)
    fit = forest.fit_forest(dm, ForestConfig(n_trees=3, mtry=None, bootstrap=False, seed=0))
    with pytest.raises(ModelError):
        forest.oob_predictions(fit, dm)


def test_permutation_importance_ranks_signal_over_noise():
    rng = np.random.default_rng(7)
    n = 300
    X = rng.normal(size=(n, 3))
    y = 3.0 * X[:, 0] + rng.normal(scale=0.1, size=n)  # x1, x2 pure noise
    dm = make_design(X, y)
    fit = forest.fit_forest(dm, ForestConfig(n_trees=40, mtry=3, seed=8))
    entries = forest.permutation_importance(fit.predict, dm, repeats=5,
                                            rng=np.random.default_rng(0))
    ranked = sorted(entries, key=lambda e: e.delta_mse, reverse=True)
    assert ranked[0].feature == "x0"
    assert ranked[0].delta_mse > 5 * max(abs(e.delta_mse) for e in ranked[1:])


def test_permutation_importance_groups_indicator_columns():
    rng = np.random.default_rng(8)
    n = 200
    lv = rng.integers(0, 3, size=n)
    X = np.column_stack([(lv == 0), (lv == 1), (lv == 2),
                         rng.normal(size=n)]).astype(float)
    y = np.array([0.0, 2.0, 5.0])[lv] + 0.1 * X[:, 3]
    dm = make_design(X, y, names=["kind=a", "kind=b", "kind=c", "z"],
                     levels=["a", "b", "c", None])
    fit = forest.fit_forest(dm, ForestConfig(n_trees=40, mtry=4, seed=9))
    entries = forest.permutation_importance(fit.predict, dm, repeats=5,
                                            rng=np.random.default_rng(1))
    names = [e.feature for e in entries]
    assert sorted(names) == ["kind", "z"]  # one entry per source feature


def test_partial_dependence_numeric_monotone_signal():
    rng = np.random.default_rng(9)
    n = 250
    X = rng.uniform(size=(n, 2))
    y = 4.0 * X[:, 0] + rng.normal(scale=0.1, size=n)
    dm = make_design(X, y)
    fit = forest.fit_forest(dm, ForestConfig(n_trees=30, mtry=2, seed=10))
    curve = forest.partial_dependence(fit.predict, dm, "x0",
                                      np.linspace(0.05, 0.95, 10))
    vals = [v for _, v in curve]
    assert vals[-1] - vals[0] > 2.0
    assert all(b >= a - 0.15 for a, b in zip(vals, vals[1:]))


def test_partial_dependence_categorical_levels():
    rng = np.random.default_rng(10)
    n = 200
    lv = rng.integers(0, 2, size=n)
    X = np.column_stack([(lv == 0), (lv == 1), rng.normal(size=n)]).astype(float)
    y = np.where(lv == 0, 1.0, 6.0) + rng.normal(scale=0.1, size=n)
    dm = make_design(X, y, names=["g=a", "g=b", "w"], levels=["a", "b", None])
    fit = forest.fit_forest(dm, ForestConfig(n_trees=30, mtry=3, seed=11))
    curve = forest.partial_dependence(fit.predict, dm, "g", ["a", "b"])
    assert curve[1][1] - curve[0][1] > 3.0
    with pytest.raises(ModelError):
        forest.partial_dependence(fit.predict, dm, "g", ["missing-level"])


def test_importance_and_pdp_files(tmp_path):
    rng = np.random.default_rng(11)
    dm = friedman_design(rng, 100)
    fit = forest.fit_forest(dm, ForestConfig(n_trees=10, mtry=None, seed=12))
    entries = forest.permutation_importance(fit.predict, dm, repeats=2,
                                            rng=np.random.default_rng(2))
    ipath = tmp_path / "importance.csv"
    forest.write_importance(entries, ipath)
    assert len(ipath.read_text().strip().splitlines()) == len(entries) + 1
    curve = forest.partial_dependence(fit.predict, dm, "x0", [0.2, 0.8])
    ppath = tmp_path / "pdp.csv"
    forest.write_pdp(curve, ppath, "x0")
    assert len(ppath.read_text().strip().splitlines()) == 3
