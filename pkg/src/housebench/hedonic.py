"""Hedonic OLS price model with heteroskedasticity-robust inference.

Fitting goes through a QR decomposition rather than explicit normal
equations; (X'X)^-1 is recovered from the triangular factor for the sandwich
covariance. Robust standard errors default to HC0, with the n/(n-p)
small-sample factor available as HC1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr as pivoted_qr
from scipy.linalg import solve_triangular

from .errors import ModelError
from .preprocess import DesignMatrix
from .stats import chi2_sf, normal_sf

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class OlsFit:
    beta: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    xtx_inverse: np.ndarray
    df_resid: int
    column_names: list[str]

    def predict(self, X_new: np.ndarray) -> np.ndarray:
        X_new = np.asarray(X_new, dtype=float)
        if X_new.ndim == 1:
            X_new = X_new[None, :]
        if X_new.shape[1] != self.beta.size:
            raise ModelError(
                f"predict: design has {X_new.shape[1]} columns, fit expects {self.beta.size}")
        return X_new @ self.beta


@dataclass(frozen=True)
class RobustInference:
    covariance: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    estimator: str  # "HC0" or "HC1"


def fit_ols(dm: DesignMatrix) -> OlsFit:
    X, y = dm.X, dm.y
    n, p = X.shape
    if n <= p:
        raise ModelError(f"OLS needs n > p, got n={n}, p={p}")
    Q, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    tol = RANK_RTOL * diag.max()
    deficient = [dm.column_names()[j] for j in range(p) if diag[j] <= tol]
    if deficient:
        raise ModelError(f"design is rank deficient; dependent column(s): {deficient}")
    beta = solve_triangular(R, Q.T @ y, lower=False)
    fitted = X @ beta
    residuals = y - fitted
    r_inv = solve_triangular(R, np.eye(p), lower=False)
    xtx_inverse = r_inv @ r_inv.T
    return OlsFit(beta=beta, residuals=residuals, fitted=fitted,
                  xtx_inverse=xtx_inverse, df_resid=n - p,
                  column_names=dm.column_names())


def white_covariance(fit: OlsFit, dm: DesignMatrix, hc1: bool = False) -> RobustInference:
    """White sandwich covariance (X'X)^-1 X' diag(e^2) X (X'X)^-1."""
    X = dm.X
    n, p = X.shape
    e2 = fit.residuals ** 2
    meat = (X * e2[:, None]).T @ X
    cov = fit.xtx_inverse @ meat @ fit.xtx_inverse
    if hc1:
        cov = cov * (n / (n - p))
    cov = 0.5 * (cov + cov.T)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    t_stats = np.empty(p)
    p_values = np.empty(p)
    for j in range(p):
        if se[j] > 0:
            t_stats[j] = fit.beta[j] / se[j]
            p_values[j] = 2.0 * normal_sf(abs(t_stats[j]))
        else:
            # degenerate: zero residual variance in this direction
            t_stats[j] = 0.0 if fit.beta[j] == 0 else math.inf * np.sign(fit.beta[j])
            p_values[j] = 1.0 if fit.beta[j] == 0 else 0.0
    return RobustInference(covariance=cov, std_errors=se, t_stats=t_stats,
                           p_values=p_values, estimator="HC1" if hc1 else "HC0")


@dataclass(frozen=True)
class WhiteTestResult:
    statistic: float
    p_value: float
    df: int
    n_aux_terms: int
    n_dropped_terms: int


def _auxiliary_design(X: np.ndarray, intercept: bool, max_cross: int = 10) -> np.ndarray:
    """Levels, squares, and cross-products of the regressors.

    Squares of binary indicator columns duplicate the levels and get weeded
    out with the other degenerate columns later. Cross-products are capped to
    the ``max_cross`` highest-variance regressors to keep the auxiliary
    design narrower than n.
    """
    Z = X[:, 1:] if intercept else X
    terms = [np.ones(Z.shape[0]), Z]
    is_binary = np.array([set(np.unique(Z[:, j])) <= {0.0, 1.0} for j in range(Z.shape[1])])
    squares = Z[:, ~is_binary] ** 2
    if squares.shape[1]:
        terms.append(squares)
    order = np.argsort(-Z.var(axis=0), kind="stable")[:max_cross]
    for a in range(len(order)):
        for b in range(a + 1, len(order)):
            terms.append(Z[:, order[a]] * Z[:, order[b]])
    return np.column_stack([t if t.ndim == 2 else t.reshape(Z.shape[0], -1) for t in terms])


def white_test(fit: OlsFit, dm: DesignMatrix) -> WhiteTestResult:
    """White heteroskedasticity test: n * R^2 from regressing e^2 on the
    auxiliary design, against chi-squared with (aux columns - 1) df."""
    aux = _auxiliary_design(dm.X, dm.intercept)
    n = aux.shape[0]
    # drop linearly dependent auxiliary terms via pivoted QR
    _, R, piv = pivoted_qr(aux, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > RANK_RTOL * diag.max()))
    keep = np.sort(piv[:rank])
    dropped = aux.shape[1] - rank
    aux = aux[:, keep]
    if n <= aux.shape[1]:
        raise ModelError(
            f"White test auxiliary design needs n > p_aux, got n={n}, p_aux={aux.shape[1]}")
    e2 = fit.residuals ** 2
    coef, *_ = np.linalg.lstsq(aux, e2, rcond=None)
    pred = aux @ coef
    sst = float(np.sum((e2 - e2.mean()) ** 2))
    if sst == 0.0:
        # exactly homoskedastic squared residuals
        return WhiteTestResult(0.0, 1.0, aux.shape[1] - 1, aux.shape[1], dropped)
    r2 = max(0.0, 1.0 - float(np.sum((e2 - pred) ** 2)) / sst)
    stat = n * r2
    df = aux.shape[1] - 1
    return WhiteTestResult(stat, chi2_sf(stat, df), df, aux.shape[1], dropped)


def significance_stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def write_coefficient_table(fit: OlsFit, inference: RobustInference, path) -> None:
    """CSV table of coefficients with robust SEs, t stats, and stars."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variable", "coefficient", "robust_std_error",
                         "t_statistic", "p_value", "significance"])
        for j, name in enumerate(fit.column_names):
            writer.writerow([
                name,
                repr(float(fit.beta[j])),
                repr(float(inference.std_errors[j])),
                repr(float(inference.t_stats[j])),
                repr(float(inference.p_values[j])),
                significance_stars(float(inference.p_values[j])),
            ])


def predict(fit: OlsFit, X_new: np.ndarray) -> np.ndarray:
    return fit.predict(X_new)
