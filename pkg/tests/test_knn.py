"""Brute-force k-nearest-neighbor regression."""

import numpy as np
import pytest

from housebench import knn
from housebench.errors import ModelError
from housebench.knn import KnnConfig
from housebench.preprocess import ColumnProvenance, DesignMatrix


def make_design(X, y):
    cols = [ColumnProvenance(f"x{j}", f"x{j}") for j in range(X.shape[1])]
    return DesignMatrix(np.asarray(X, float), np.asarray(y, float), cols,
                        intercept=False)


def test_distance_hand_values():
    a = np.array([0.0, 0.0])
    b = np.array([3.0, 4.0])
    assert knn.distance(a, b, "euclidean") == pytest.approx(5.0)
    assert knn.distance(a, b, "manhattan") == pytest.approx(7.0)
    assert knn.distance(a, b, "chebyshev") == pytest.approx(4.0)
    assert knn.distance(a, b, "minkowski", minkowski_p=3.0) == pytest.approx(
        (27.0 + 64.0) ** (1.0 / 3.0))


def test_distance_validation():
    with pytest.raises(ModelError):
        knn.distance(np.zeros(2), np.zeros(3))
    with pytest.raises(ModelError):
        knn.distance(np.zeros(2), np.ones(2), "cosine")
    with pytest.raises(ModelError):
        knn.distance(np.zeros(2), np.ones(2), "minkowski", minkowski_p=0.0)


def test_prediction_is_neighbor_mean():
    X = np.array([[0.0], [1.0], [2.0], [10.0]])
    y = np.array([1.0, 3.0, 5.0, 100.0])
    fit = knn.fit(make_design(X, y), KnnConfig(k=3))
    assert fit.predict(np.array([[0.5]]))[0] == pytest.approx(3.0)


def test_equal_distances_break_ties_by_training_index():
    # rows 1 and 2 are equidistant from the query; k=2 must take rows 0 and 1
    X = np.array([[0.0], [1.0], [-1.0], [5.0]])
    y = np.array([10.0, 20.0, 30.0, 40.0])
    fit = knn.fit(make_design(X, y), KnnConfig(k=2))
    assert fit.predict(np.array([[0.0]]))[0] == pytest.approx(15.0)


def test_k_larger_than_training_set_rejected():
    X = np.arange(3.0)[:, None]
    dm = make_design(X, np.arange(3.0))
    with pytest.raises(ModelError):
        knn.fit(dm, KnnConfig(k=4))


def test_predict_checks_width():
    fit = knn.fit(make_design(np.zeros((5, 2)), np.arange(5.0)), KnnConfig(k=1))
    with pytest.raises(ModelError):
        fit.predict(np.zeros((2, 3)))


def test_training_copies_are_frozen():
    X = np.zeros((5, 2))
    fit = knn.fit(make_design(X, np.arange(5.0)), KnnConfig(k=1))
    with pytest.raises(ValueError):
        fit.X_train[0, 0] = 1.0


def test_chunked_prediction_matches_row_by_row():
    rng = np.random.default_rng(0)
    X_train = rng.normal(size=(400, 6))
    y_train = rng.normal(size=400)
    X_query = rng.normal(size=(50, 6))
    for metric in ("euclidean", "manhattan", "chebyshev", "minkowski"):
        cfg = KnnConfig(k=5, metric=metric)
        fit = knn.fit(make_design(X_train, y_train), cfg)
        batch = fit.predict(X_query)
        single = np.concatenate([fit.predict(q[None, :]) for q in X_query])
        assert np.array_equal(batch, single)
        # scalar distance helper agrees with the matrix path
        d0 = knn.distance(X_query[0], X_train[0], metric, cfg.minkowski_p)
        mat = knn._distance_matrix(X_query[:1], X_train[:1], cfg)
        assert d0 == pytest.approx(mat[0, 0], rel=1e-12)


def test_config_validation():
    with pytest.raises(ModelError):
        KnnConfig(k=0)
    with pytest.raises(ModelError):
        KnnConfig(k=3, metric="hamming")
