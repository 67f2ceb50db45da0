"""Acceptance gate: ten property-based criteria, one test per criterion.

Every numerical criterion is checked against an independent oracle computed
inside this file (normal equations, hand-evaluated sandwich, central finite
differences, brute-force split enumeration, full-sort neighbor search, hand
metric arithmetic, textbook t critical values) rather than against the
implementation under test.
"""

import json
import math
import time

import numpy as np
import pytest

from housebench import ann, cli, evaluation, forest, hedonic, knn, preprocess, stats, synth
from housebench.data import split
from housebench.evaluation import ExperimentPlan, metrics, paired_t_test
from housebench.preprocess import ColumnProvenance, DesignMatrix
from housebench.synth import GeneratorConfig


def design(X, y):
    cols = [ColumnProvenance(f"x{j}", f"x{j}") for j in range(X.shape[1])]
    return DesignMatrix(np.asarray(X, float), np.asarray(y, float), cols,
                        intercept=False)


# -- criterion 1: OLS vs normal-equations oracle ---------------------------------

def test_criterion_01_ols_matches_normal_equations_oracle():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    for _ in range(50):
        n = int(rng.integers(10, 41))
        p = int(rng.integers(2, 7))
        if n <= p:
            n = p + 5
        X = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
        y = X @ rng.normal(size=p) + rng.normal(scale=0.5, size=n)
        fit = hedonic.fit_ols(design(X, y))
        oracle = np.linalg.solve(X.T @ X, X.T @ y)
        assert np.allclose(fit.beta, oracle, rtol=1e-10, atol=0)
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    print(f"PASS criterion 1: 50 OLS fits match the normal-equations oracle "
          f"(rel 1e-10) in {elapsed:.3f}s")


# -- criterion 2: White sandwich oracle -------------------------------------------

def test_criterion_02_white_sandwich_matches_direct_evaluation():
    rng = np.random.default_rng(102)
    for _ in range(20):
        n = int(rng.integers(15, 60))
        p = int(rng.integers(2, 6))
        X = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
        y = X @ rng.normal(size=p) + rng.normal(size=n) * rng.uniform(0.1, 2.0, n)
        dm = design(X, y)
        fit = hedonic.fit_ols(dm)
        inf = hedonic.white_covariance(fit, dm)
        bread = np.linalg.inv(X.T @ X)
        meat = X.T @ np.diag(fit.residuals ** 2) @ X
        oracle = bread @ meat @ bread
        assert np.allclose(inf.covariance, oracle, rtol=0, atol=1e-12)
    # exact fit: zero residuals must give the exact zero matrix
    X = np.column_stack([np.ones(8), np.arange(8.0)])
    y = 1.0 + 2.0 * np.arange(8.0)
    dm = design(X, y)
    fit = hedonic.fit_ols(dm)
    fit = hedonic.OlsFit(beta=fit.beta, residuals=np.zeros(8), fitted=y,
                         xtx_inverse=fit.xtx_inverse, df_resid=fit.df_resid,
                         column_names=fit.column_names)
    inf = hedonic.white_covariance(fit, dm)
    assert np.array_equal(inf.covariance, np.zeros((2, 2)))
    print("PASS criterion 2: sandwich covariance matches direct evaluation "
          "(abs 1e-12); zero residuals give the zero matrix")


# -- criterion 3: gradient check ----------------------------------------------------

def test_criterion_03_backward_matches_central_differences():
    rng = np.random.default_rng(103)
    shapes = [(0, 4), (1, 3), (1, 16), (2, 5), (2, 16)]  # (hidden layers, units)
    start = time.perf_counter()
    step = 1e-6
    for hidden, units in shapes:
        cfg = ann.NetworkConfig(hidden_layers=hidden, units_per_layer=units,
                                l2_lambda=0.01, seed=hidden * 100 + units)
        input_dim = int(rng.integers(2, 6))
        state = ann.init(cfg, input_dim)
        X = rng.normal(size=(10, input_dim))
        y = rng.normal(size=10)
        grad_w, grad_b = ann.backward(state, X, y)
        for params, grads in ((state.weights, grad_w), (state.biases, grad_b)):
            for P, G in zip(params, grads):
                it = np.nditer(P, flags=["multi_index"])
                while not it.finished:
                    ix = it.multi_index
                    orig = P[ix]
                    P[ix] = orig + step
                    up = ann.loss(state, X, y)
                    P[ix] = orig - step
                    down = ann.loss(state, X, y)
                    P[ix] = orig
                    numeric = (up - down) / (2 * step)
                    denom = max(abs(numeric), abs(G[ix]), 1e-8)
                    assert abs(G[ix] - numeric) / denom < 1e-5, (hidden, units, ix)
                    it.iternext()
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print(f"PASS criterion 3: backward matches central differences "
          f"(rel 1e-5, step 1e-6) on {len(shapes)} shapes in {elapsed:.2f}s")


# -- criterion 4: forest degenerates to CART; splits beat brute force ----------------

def brute_force_best(X, y, rows, min_leaf):
    """Enumerate every (feature, midpoint) and return the max SSE reduction."""
    ysub = y[rows]
    parent = float(np.sum((ysub - ysub.mean()) ** 2))
    best = None
    for f in range(X.shape[1]):
        vals = np.sort(np.unique(X[rows, f]))
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = (lo + hi) / 2.0
            left = ysub[X[rows, f] <= thr]
            right = ysub[X[rows, f] > thr]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            sse = float(np.sum((left - left.mean()) ** 2)
                        + np.sum((right - right.mean()) ** 2))
            reduction = parent - sse
            if best is None or reduction > best[0] + 1e-12:
                best = (reduction, f, thr)
    return best


def test_criterion_04_single_tree_forest_equals_cart_and_splits_are_optimal():
    rng = np.random.default_rng(104)
    n = 200
    X = rng.uniform(size=(n, 4))
    y = (3.0 * X[:, 0] + np.sin(4 * X[:, 1]) + (X[:, 2] > 0.5)
         + rng.normal(scale=0.2, size=n))
    dm = design(X, y)
    min_leaf = 5
    cfg = forest.ForestConfig(n_trees=1, bootstrap=False, mtry=4,
                              min_leaf=min_leaf, seed=0)
    fit = forest.fit_forest(dm, cfg)
    standalone = forest.fit_tree(X, y, np.arange(n), cfg,
                                 rng=forest._tree_rng(0, 0))
    assert np.array_equal(fit.predict(X), forest.tree_predict(standalone, X))

    audited = 0

    def audit(node, rows):
        nonlocal audited
        if node.is_leaf:
            return
        if rows.size <= 50:
            oracle = brute_force_best(X, y, rows, min_leaf)
            assert oracle is not None
            chosen = forest.best_split(X, y, rows, np.arange(4), min_leaf)
            assert chosen is not None
            assert chosen[0] == pytest.approx(oracle[0], rel=1e-9)
            assert (node.feature, node.threshold) == (chosen[1], pytest.approx(chosen[2]))
            audited += 1
        go_left = X[rows, node.feature] <= node.threshold
        audit(node.left, rows[go_left])
        audit(node.right, rows[~go_left])

    audit(fit.trees[0], np.arange(n))
    assert audited >= 5
    print(f"PASS criterion 4: 1-tree forest equals the standalone tree on 200 "
          f"rows; {audited} audited nodes match brute-force split enumeration")


# -- criterion 5: kNN vs full-sort oracle ----------------------------------------------

def test_criterion_05_knn_matches_full_sort_oracle():
    rng = np.random.default_rng(105)
    n_train, n_query, p, k = 500, 100, 6, 7
    X_train = np.round(rng.normal(size=(n_train, p)), 1)  # ties are likely
    y_train = rng.normal(size=n_train)
    X_query = np.round(rng.normal(size=(n_query, p)), 1)
    X_query[:10] = X_train[:10]  # force exact-distance ties
    fit = knn.fit(design(X_train, y_train), knn.KnnConfig(k=k))
    got = fit.predict(X_query)
    for i in range(n_query):
        d = np.sqrt(np.sum((X_train - X_query[i]) ** 2, axis=1))
        # full sort on (distance, training index): lowest index wins ties
        order = sorted(range(n_train), key=lambda j: (d[j], j))
        oracle = float(np.mean(y_train[order[:k]]))
        assert got[i] == oracle
    print("PASS criterion 5: kNN equals the full-sort oracle exactly on "
          "100 queries over 500 training rows (index tie rule included)")


# -- criterion 6: metric identities -------------------------------------------------

def test_criterion_06_metric_identities():
    y = np.array([1.0, 2.0, 4.0])
    y_hat = np.array([2.0, 2.0, 2.0])
    m = metrics(y, y_hat)
    # errors (-1, 0, 2): rmse = sqrt(5/3), mae = 1, mape = 50%,
    # r2 = 1 - 5 / sum((y - 7/3)^2) = 1 - 5/(14/3)
    assert abs(m.rmse - math.sqrt(5.0 / 3.0)) < 1e-12
    assert abs(m.mae - 1.0) < 1e-12
    assert abs(m.mape - 50.0) < 1e-12
    assert abs(m.r2 - (1.0 - 5.0 / (14.0 / 3.0))) < 1e-12

    perfect = metrics(y, y.copy())
    assert (perfect.rmse, perfect.mae, perfect.mape, perfect.r2) == (0.0, 0.0, 0.0, 1.0)

    rng = np.random.default_rng(106)
    for _ in range(1000):
        n = int(rng.integers(2, 30))
        yy = rng.normal(loc=5.0, size=n)
        if np.any(yy == 0) or np.ptp(yy) == 0:
            continue
        mm = metrics(yy, yy + rng.normal(size=n))
        assert mm.rmse >= mm.mae
    print("PASS criterion 6: metric identities hold to 1e-12; "
          "rmse >= mae on 1000 random vectors; perfect prediction is (0,0,0,1)")


# -- criterion 7: protocol reproduction at desk scale ----------------------------------

def test_criterion_07_forest_beats_hedonic_significantly():
    ds = synth.generate(GeneratorConfig(n=1000, seed=7, noise_std=0.2,
                                        missing_rate=0.03, outlier_rate=0.02)).dataset
    plan = ExperimentPlan(models=("hp", "rf"), repeats=20, base_seed=0)
    start = time.perf_counter()
    report = evaluation.run_experiment(plan, ds)
    elapsed = time.perf_counter() - start
    assert elapsed < 600.0
    rf_mean, _ = report.aggregate("rf", "test", "rmse")
    hp_mean, _ = report.aggregate("hp", "test", "rmse")
    assert rf_mean < hp_mean
    res = report.paired_tests["hp_vs_rf"]
    assert res["p"] < 0.01
    print(f"PASS criterion 7: 20-repeat protocol in {elapsed:.0f}s; "
          f"test RMSE rf={rf_mean:.4f} < hp={hp_mean:.4f}, paired-t p={res['p']:.2e}")


# -- criterion 8: U-shaped age marginal effect ------------------------------------------

def test_criterion_08_age_partial_dependence_flips_slope_once():
    ds = synth.generate(GeneratorConfig(n=1000, seed=7, noise_std=0.2,
                                        missing_rate=0.03, outlier_rate=0.02)).dataset
    sp = split(ds, (0.8, 0.1, 0.1), seed=0)
    pipe = preprocess.fit_pipeline(ds, sp.train)
    dm = pipe.build_design(ds, sp.train, coding="ml")
    fit = forest.fit_forest(dm, forest.ForestConfig(n_trees=100, mtry=None, seed=0))
    col = dict(dm.feature_groups())["Age"][0]
    grid = np.linspace(dm.X[:, col].min(), dm.X[:, col].max(), 20)
    curve = forest.partial_dependence(fit.predict, dm, "Age", grid)
    values = np.array([v for _, v in curve])
    signs = np.sign(np.diff(values))
    flips = int(np.sum(signs[1:] != signs[:-1]))
    assert flips == 1
    assert signs[0] < 0 < signs[-1]  # decreasing first, increasing after
    print("PASS criterion 8: RF partial dependence on age is U-shaped "
          "(slope sign flips exactly once on a 20-point grid)")


# -- criterion 9: end-to-end determinism ---------------------------------------------

def test_criterion_09_two_compare_runs_are_byte_identical(tmp_path, capsys):
    config = {
        "synthetic": {"n": 300, "seed": 13, "noise_std": 0.2,
                      "missing_rate": 0.02, "outlier_rate": 0.02},
        "plan": {"models": ["hp", "rf", "knn"], "repeats": 3, "base_seed": 1,
                 "grids": {"rf": [{"n_trees": 25, "mtry": None, "min_leaf": 5}]}},
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["compare", "--config", str(cfg_path), "--out", str(out_a)]) == 0
    assert cli.main(["compare", "--config", str(cfg_path), "--out", str(out_b)]) == 0
    capsys.readouterr()
    assert (out_a / "report.json").read_bytes() == (out_b / "report.json").read_bytes()
    print("PASS criterion 9: two identical compare runs produce "
          "byte-identical report.json")


# -- criterion 10: t critical values --------------------------------------------------

def test_criterion_10_t_distribution_reproduces_tabulated_critical_values():
    # standard two-sided critical values (e.g. any printed t table)
    table = {
        (2, 0.05): 4.303, (2, 0.01): 9.925,
        (5, 0.05): 2.571, (5, 0.01): 4.032,
        (19, 0.05): 2.093, (19, 0.01): 2.861,
    }
    for (df, alpha), expect in table.items():
        crit = stats.t_critical_two_sided(alpha, df)
        assert round(crit, 3) == pytest.approx(expect, abs=5e-4), (df, alpha)
    # and the paired test built on the same CDF agrees with the table's logic
    res = paired_t_test(np.array([1.0, 2.0, 3.0]), np.array([0.5, 1.0, 3.5]))
    assert res.df == 2
    print("PASS criterion 10: t CDF reproduces tabulated two-sided critical "
          "values for df in {2, 5, 19} to 3 decimals")
