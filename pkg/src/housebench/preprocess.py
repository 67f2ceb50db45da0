"""Preprocessing pipeline: imputation, winsorization, multicollinearity
screening, standardization, one-hot encoding, and the log target transform.

All statistics are fitted on training rows only and then applied unchanged to
validation/test rows. Two design codings are produced from one fit:

* ``ml``       -- full one-hot indicators per categorical level, no intercept,
                  raw (standardized) numeric features. Used by the neural net,
                  forest, and kNN models.
* ``hedonic``  -- intercept plus reference-level-dropped indicators, and the
                  configured skewed regressors (lot and living area by default)
                  entered in natural logs. Used by the OLS price model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import DataError

DEFAULT_R_THRESHOLD = 0.8
DEFAULT_GVIF_CUTOFF = math.sqrt(5.0)  # on the GVIF^(1/(2 df)) scale
DEFAULT_LOG_REGRESSORS = ("Lot Area", "Living Area")


@dataclass(frozen=True)
class ColumnProvenance:
    """Where a design column came from: source feature and, for indicator
    columns, the categorical level it encodes."""
    name: str
    source: str
    level: str | None = None


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray
    columns: list[ColumnProvenance]
    intercept: bool = False

    def __post_init__(self):
        if self.X.shape[1] != len(self.columns):
            raise DataError("design width does not match column provenance")
        if not np.all(np.isfinite(self.X)) or not np.all(np.isfinite(self.y)):
            raise DataError("design matrix contains non-finite entries")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def feature_groups(self) -> list[tuple[str, list[int]]]:
        """Design column indices grouped by source feature, skipping the
        intercept, in first-appearance order."""
        groups: dict[str, list[int]] = {}
        for j, col in enumerate(self.columns):
            if col.source == "(Intercept)":
                continue
            groups.setdefault(col.source, []).append(j)
        return list(groups.items())

    def take(self, idx) -> "DesignMatrix":
        return DesignMatrix(self.X[idx], self.y[idx], self.columns, self.intercept)


# ---------------------------------------------------------------------------
# row-level transforms
# ---------------------------------------------------------------------------

def impute(ds: Dataset, train_idx) -> Dataset:
    """Fill numeric missing cells with the train mean and categorical/binary
    missing cells with the train mode (lexicographically smallest on ties)."""
    train_idx = np.asarray(train_idx)
    if train_idx.size == 0:
        raise DataError("impute requires a non-empty training index list")
    new_cols: dict[str, np.ndarray] = {}
    new_miss: dict[str, np.ndarray] = {}
    for col in ds.schema:
        if col.role != "feature":
            continue
        mask = ds.missing_mask(col.name)
        if not mask.any():
            continue
        values = ds.column(col.name).copy()
        train_mask = mask[train_idx]
        if train_mask.all():
            raise DataError(f"column {col.name!r} is entirely missing on the training rows")
        if col.is_numeric:
            fill = float(np.mean(values[train_idx][~train_mask]))
        else:
            fill = _mode(values[train_idx][~train_mask], col.levels)
        values[mask] = fill
        new_cols[col.name] = values
        new_miss[col.name] = np.zeros(ds.n, dtype=bool)
    if not new_cols:
        return ds
    return ds.replace_columns(new_cols, new_miss)


def _mode(values, levels) -> str:
    counts = {lv: 0 for lv in levels}
    for v in values:
        counts[v] += 1
    best = max(counts.values())
    # lexicographically smallest level among the tied maxima
    return min(lv for lv, c in counts.items() if c == best)


def train_quantile(values: np.ndarray, q: float) -> float:
    """Linear-interpolation quantile between order statistics."""
    return float(np.quantile(values, q, method="linear"))


def winsorize(ds: Dataset, train_idx, upper_q: float = 0.95,
              two_sided: bool = False) -> Dataset:
    """Cap numeric feature values at train quantiles.

    One-sided caps the upper tail at ``upper_q``; two-sided additionally caps
    the lower tail at ``1 - upper_q``. Cells must be non-missing (impute first).
    """
    train_idx = np.asarray(train_idx)
    new_cols: dict[str, np.ndarray] = {}
    new_miss: dict[str, np.ndarray] = {}
    for col in ds.schema:
        if col.role != "feature" or not col.is_numeric:
            continue
        mask = ds.missing_mask(col.name)
        if mask.any():
            raise DataError(f"winsorize: column {col.name!r} still has missing cells")
        values = ds.column(col.name)
        train_vals = values[train_idx]
        hi = train_quantile(train_vals, upper_q)
        capped = np.minimum(values, hi)
        if two_sided:
            lo = train_quantile(train_vals, 1.0 - upper_q)
            capped = np.maximum(capped, lo)
        if np.array_equal(capped, values):
            continue
        new_cols[col.name] = capped
        new_miss[col.name] = mask
    if not new_cols:
        return ds
    return ds.replace_columns(new_cols, new_miss)


# ---------------------------------------------------------------------------
# multicollinearity screening
# ---------------------------------------------------------------------------

def correlation_matrix(ds: Dataset, names: list[str], train_idx) -> tuple[np.ndarray, list[str]]:
    """Pearson correlations among numeric feature columns on the train rows.

    Returns (matrix, constant_columns). Rows/columns of constant features are
    NaN (undefined) except for the diagonal, which is always exactly 1.
    """
    train_idx = np.asarray(train_idx)
    if train_idx.size < 2:
        raise DataError("correlation matrix needs at least 2 training rows")
    mat = np.column_stack([ds.column(n)[train_idx] for n in names])
    stds = mat.std(axis=0)
    constant = [names[j] for j in range(len(names)) if stds[j] == 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(mat, rowvar=False)
    corr = np.atleast_2d(corr)
    np.fill_diagonal(corr, 1.0)
    return corr, constant


@dataclass(frozen=True)
class DroppedFeature:
    name: str
    reason: str  # "correlation", "gvif", "singular", or "constant"
    detail: str = ""


def _reference_coded(ds: Dataset, numeric: list[str], categorical: list[str],
                     train_idx) -> tuple[np.ndarray, list[str], list[int]]:
    """Centered design with reference-dropped dummies on the train rows.

    Returns (matrix, group names aligned with columns via group_of, group_of).
    Dummy columns for levels unobserved on train are omitted.
    """
    cols, owners = [], []
    names = []
    for name in numeric:
        cols.append(ds.column(name)[train_idx].astype(float))
        owners.append(name)
    for name in categorical:
        col = ds.column(name)[train_idx]
        levels = ds.column_schema(name).levels
        for level in levels[1:]:
            ind = (col == level).astype(float)
            if ind.std() == 0:
                continue
            cols.append(ind)
            owners.append(name)
    names = numeric + categorical
    mat = np.column_stack(cols) if cols else np.empty((len(train_idx), 0))
    group_of = [names.index(o) for o in owners]
    return mat, names, group_of


def _logdet(mat: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(mat)
    if sign <= 0:
        return -math.inf
    return logdet


def _gvif(corr: np.ndarray, member_idx: np.ndarray) -> float:
    """Fox-Monette generalized VIF via the determinant ratio (in logs, so a
    wide correlation matrix cannot underflow)."""
    other = np.setdiff1d(np.arange(corr.shape[0]), member_idx)
    logdet_all = _logdet(corr)
    if not math.isfinite(logdet_all):
        return math.inf
    logdet_g = _logdet(corr[np.ix_(member_idx, member_idx)])
    logdet_o = _logdet(corr[np.ix_(other, other)]) if other.size else 0.0
    return math.exp(logdet_g + logdet_o - logdet_all)


def screen_multicollinearity(ds: Dataset, train_idx, *,
                             r_threshold: float = DEFAULT_R_THRESHOLD,
                             gvif_cutoff: float = DEFAULT_GVIF_CUTOFF) -> list[DroppedFeature]:
    """Two-stage screen on the (imputed, winsorized) training rows.

    Stage 1 drops, for every numeric pair with |r| above the threshold, the
    member with the larger mean absolute correlation to all other numeric
    features (tie: the later one in schema order). Stage 2 iterates the GVIF
    rule, dropping the worst feature until every GVIF^(1/(2 df)) is within the
    cutoff. Exact linear dependence is reported as "singular".
    """
    numeric = [c.name for c in ds.schema if c.role == "feature" and c.is_numeric]
    categorical = [c.name for c in ds.schema if c.role == "feature" and not c.is_numeric]
    dropped: list[DroppedFeature] = []

    # constant-on-train features can support neither correlations nor splits
    for name in list(numeric):
        if ds.column(name)[np.asarray(train_idx)].std() == 0:
            numeric.remove(name)
            dropped.append(DroppedFeature(name, "constant"))
    for name in list(categorical):
        col = ds.column(name)[np.asarray(train_idx)]
        if len(set(col)) < 2:
            categorical.remove(name)
            dropped.append(DroppedFeature(name, "constant"))

    # stage 1: pairwise |r| among numeric features
    while len(numeric) >= 2:
        corr, _ = correlation_matrix(ds, numeric, train_idx)
        absr = np.abs(corr)
        np.fill_diagonal(absr, 0.0)
        i, j = np.unravel_index(np.argmax(absr), absr.shape)
        if absr[i, j] <= r_threshold:
            break
        mean_i = absr[i].sum() / (len(numeric) - 1)
        mean_j = absr[j].sum() / (len(numeric) - 1)
        if mean_i > mean_j:
            victim = i
        elif mean_j > mean_i:
            victim = j
        else:
            victim = max(i, j)  # tie: later schema order
        partner = numeric[j if victim == i else i]
        name = numeric.pop(victim)
        dropped.append(DroppedFeature(
            name, "correlation", f"|r|={absr[i, j]:.4f} with {partner}"))

    # stage 2: iterated GVIF on the reference-coded design
    while True:
        mat, names, group_of = _reference_coded(ds, numeric, categorical, np.asarray(train_idx))
        if mat.shape[1] < 2 or len(names) < 2:
            break
        corr = np.corrcoef(mat, rowvar=False)
        if np.linalg.eigvalsh(corr).min() < 1e-10:
            # exact (or numerically exact) linear dependence: drop the owner
            # of the most perfectly explained column
            r2_worst, owner = -1.0, None
            for j in range(mat.shape[1]):
                others = np.delete(np.arange(mat.shape[1]), j)
                xj = mat[:, j] - mat[:, j].mean()
                coef, *_ = np.linalg.lstsq(mat[:, others] - mat[:, others].mean(axis=0),
                                           xj, rcond=None)
                resid = xj - (mat[:, others] - mat[:, others].mean(axis=0)) @ coef
                r2 = 1.0 - float(resid @ resid) / float(xj @ xj)
                if r2 > r2_worst:
                    r2_worst, owner = r2, names[group_of[j]]
            dropped.append(DroppedFeature(owner, "singular"))
            if owner in numeric:
                numeric.remove(owner)
            else:
                categorical.remove(owner)
            continue
        worst_name, worst_score, worst_df = None, -math.inf, 1
        for g, name in enumerate(names):
            members = np.flatnonzero(np.array(group_of) == g)
            if members.size == 0:
                continue
            gvif = _gvif(corr, members)
            df = members.size
            score = gvif ** (1.0 / (2.0 * df)) if math.isfinite(gvif) else math.inf
            if score > worst_score:
                worst_name, worst_score, worst_df = name, score, df
        if worst_name is None or worst_score <= gvif_cutoff:
            break
        reason = "singular" if math.isinf(worst_score) else "gvif"
        detail = "" if math.isinf(worst_score) else \
            f"GVIF^(1/(2*{worst_df}))={worst_score:.4f}"
        dropped.append(DroppedFeature(worst_name, reason, detail))
        if worst_name in numeric:
            numeric.remove(worst_name)
        else:
            categorical.remove(worst_name)
    return dropped


# ---------------------------------------------------------------------------
# pipeline fit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineOptions:
    winsor_upper_q: float = 0.95
    two_sided_winsor: bool = False
    r_threshold: float = DEFAULT_R_THRESHOLD
    gvif_cutoff: float = DEFAULT_GVIF_CUTOFF
    log_regressors: tuple[str, ...] = DEFAULT_LOG_REGRESSORS  # hedonic coding only
    screen: bool = True


@dataclass(frozen=True)
class PipelineFit:
    options: PipelineOptions
    impute_means: dict[str, float]
    impute_modes: dict[str, str]
    winsor_hi: dict[str, float]
    winsor_lo: dict[str, float]
    dropped: list[DroppedFeature]
    numeric_features: list[str]          # kept, schema order
    categorical_features: list[str]      # kept, schema order
    levels: dict[str, tuple[str, ...]]
    train_levels: dict[str, tuple[str, ...]]  # observed on train; hedonic coding
    standardize_ml: dict[str, tuple[float, float]]       # name -> (mean, std)
    standardize_hedonic: dict[str, tuple[float, float]]  # over logs where configured
    target: str

    def dropped_names(self) -> list[str]:
        return [d.name for d in self.dropped]

    # -- application ------------------------------------------------------

    def apply_rows(self, ds: Dataset) -> Dataset:
        """Impute + winsorize with the fitted statistics (idempotent)."""
        new_cols: dict[str, np.ndarray] = {}
        new_miss: dict[str, np.ndarray] = {}
        for col in ds.schema:
            if col.role != "feature":
                continue
            mask = ds.missing_mask(col.name)
            values = ds.column(col.name).copy()
            if mask.any():
                if col.is_numeric:
                    if col.name not in self.impute_means:
                        raise DataError(f"no imputation statistic fitted for {col.name!r}")
                    values[mask] = self.impute_means[col.name]
                else:
                    if col.name not in self.impute_modes:
                        raise DataError(f"no imputation statistic fitted for {col.name!r}")
                    values[mask] = self.impute_modes[col.name]
            if col.is_numeric and col.name in self.winsor_hi:
                values = np.minimum(values.astype(float), self.winsor_hi[col.name])
                if col.name in self.winsor_lo:
                    values = np.maximum(values, self.winsor_lo[col.name])
            new_cols[col.name] = values
            new_miss[col.name] = np.zeros(ds.n, dtype=bool)
        return ds.replace_columns(new_cols, new_miss)

    def build_design(self, ds: Dataset, idx=None, coding: str = "ml") -> DesignMatrix:
        """Assemble the design matrix and log-price target for given rows."""
        if coding not in ("ml", "hedonic"):
            raise DataError(f"unknown design coding {coding!r}")
        applied = self.apply_rows(ds)
        idx = np.arange(ds.n) if idx is None else np.asarray(idx)

        cols: list[np.ndarray] = []
        provenance: list[ColumnProvenance] = []
        intercept = coding == "hedonic"
        if intercept:
            cols.append(np.ones(idx.size))
            provenance.append(ColumnProvenance("(Intercept)", "(Intercept)"))

        stats = self.standardize_hedonic if coding == "hedonic" else self.standardize_ml
        for name in self.numeric_features:
            x = applied.column(name)[idx].astype(float)
            label = name
            if coding == "hedonic" and name in self.options.log_regressors:
                if np.any(x <= 0):
                    raise DataError(f"cannot log-transform {name!r}: non-positive value")
                x = np.log(x)
                label = f"Ln({name})"
            mean, std = stats[name]
            if std == 0:
                raise DataError(f"column {name!r} has zero train std; cannot standardize")
            cols.append((x - mean) / std)
            provenance.append(ColumnProvenance(label, name))

        for name in self.categorical_features:
            col = applied.column(name)[idx]
            if coding == "hedonic":
                # reference level dropped; levels unseen on train are not
                # encoded (they would be all-zero columns)
                encode_levels = self.train_levels[name][1:]
            else:
                encode_levels = self.levels[name]
            for level in encode_levels:
                cols.append((col == level).astype(float))
                provenance.append(ColumnProvenance(f"{name}={level}", name, level))

        y_raw = applied.column(self.target)[idx].astype(float)
        if np.any(np.isnan(y_raw)):
            raise DataError(f"target {self.target!r} has missing values")
        if np.any(y_raw <= 0):
            raise DataError(f"target {self.target!r} has non-positive values; log transform undefined")
        y = np.log(y_raw)
        X = np.column_stack(cols)
        return DesignMatrix(X, y, provenance, intercept=intercept)

    # -- serialization ------------------------------------------------------

    def to_json(self, path) -> None:
        doc = {
            "options": {
                "winsor_upper_q": self.options.winsor_upper_q,
                "two_sided_winsor": self.options.two_sided_winsor,
                "r_threshold": self.options.r_threshold,
                "gvif_cutoff": self.options.gvif_cutoff,
                "log_regressors": list(self.options.log_regressors),
                "screen": self.options.screen,
            },
            "impute_means": self.impute_means,
            "impute_modes": self.impute_modes,
            "winsor_hi": self.winsor_hi,
            "winsor_lo": self.winsor_lo,
            "dropped": [{"name": d.name, "reason": d.reason, "detail": d.detail}
                        for d in self.dropped],
            "numeric_features": self.numeric_features,
            "categorical_features": self.categorical_features,
            "levels": {k: list(v) for k, v in self.levels.items()},
            "train_levels": {k: list(v) for k, v in self.train_levels.items()},
            "standardize_ml": {k: list(v) for k, v in self.standardize_ml.items()},
            "standardize_hedonic": {k: list(v) for k, v in self.standardize_hedonic.items()},
            "target": self.target,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "PipelineFit":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        opts = doc["options"]
        return cls(
            options=PipelineOptions(
                winsor_upper_q=opts["winsor_upper_q"],
                two_sided_winsor=opts["two_sided_winsor"],
                r_threshold=opts["r_threshold"],
                gvif_cutoff=opts["gvif_cutoff"],
                log_regressors=tuple(opts["log_regressors"]),
                screen=opts["screen"],
            ),
            impute_means=doc["impute_means"],
            impute_modes=doc["impute_modes"],
            winsor_hi=doc["winsor_hi"],
            winsor_lo=doc["winsor_lo"],
            dropped=[DroppedFeature(**d) for d in doc["dropped"]],
            numeric_features=doc["numeric_features"],
            categorical_features=doc["categorical_features"],
            levels={k: tuple(v) for k, v in doc["levels"].items()},
            train_levels={k: tuple(v) for k, v in doc["train_levels"].items()},
            standardize_ml={k: (v[0], v[1]) for k, v in doc["standardize_ml"].items()},
            standardize_hedonic={k: (v[0], v[1]) for k, v in doc["standardize_hedonic"].items()},
            target=doc["target"],
        )


def fit_pipeline(ds: Dataset, train_idx, options: PipelineOptions = PipelineOptions()) -> PipelineFit:
    """Fit every pipeline statistic from the training rows."""
    train_idx = np.asarray(train_idx)
    if train_idx.size == 0:
        raise DataError("fit_pipeline requires non-empty training rows")

    impute_means: dict[str, float] = {}
    impute_modes: dict[str, str] = {}
    for col in ds.schema:
        if col.role != "feature":
            continue
        mask = ds.missing_mask(col.name)[train_idx]
        vals = ds.column(col.name)[train_idx]
        if mask.all():
            raise DataError(f"column {col.name!r} is entirely missing on the training rows")
        if col.is_numeric:
            impute_means[col.name] = float(np.mean(vals[~mask]))
        else:
            impute_modes[col.name] = _mode(vals[~mask], col.levels)

    imputed = impute(ds, train_idx)

    winsor_hi: dict[str, float] = {}
    winsor_lo: dict[str, float] = {}
    for col in ds.schema:
        if col.role != "feature" or not col.is_numeric:
            continue
        train_vals = imputed.column(col.name)[train_idx]
        winsor_hi[col.name] = train_quantile(train_vals, options.winsor_upper_q)
        if options.two_sided_winsor:
            winsor_lo[col.name] = train_quantile(train_vals, 1.0 - options.winsor_upper_q)
    clean = winsorize(imputed, train_idx, options.winsor_upper_q, options.two_sided_winsor)

    if options.screen:
        dropped = screen_multicollinearity(
            clean, train_idx, r_threshold=options.r_threshold,
            gvif_cutoff=options.gvif_cutoff)
    else:
        dropped = []
    dropped_names = {d.name for d in dropped}
    numeric = [c.name for c in ds.schema
               if c.role == "feature" and c.is_numeric and c.name not in dropped_names]
    categorical = [c.name for c in ds.schema
                   if c.role == "feature" and not c.is_numeric and c.name not in dropped_names]

    standardize_ml: dict[str, tuple[float, float]] = {}
    standardize_hedonic: dict[str, tuple[float, float]] = {}
    for name in numeric:
        x = clean.column(name)[train_idx].astype(float)
        standardize_ml[name] = (float(np.mean(x)), float(np.std(x)))
        if name in options.log_regressors:
            if np.any(x <= 0):
                raise DataError(f"cannot log-transform {name!r}: non-positive training value")
            x = np.log(x)
        standardize_hedonic[name] = (float(np.mean(x)), float(np.std(x)))

    return PipelineFit(
        options=options,
        impute_means=impute_means,
        impute_modes=impute_modes,
        winsor_hi=winsor_hi,
        winsor_lo=winsor_lo,
        dropped=dropped,
        numeric_features=numeric,
        categorical_features=categorical,
        levels={name: ds.column_schema(name).levels for name in categorical},
        train_levels={
            name: tuple(lv for lv in ds.column_schema(name).levels
                        if lv in set(clean.column(name)[train_idx]))
            for name in categorical},
        standardize_ml=standardize_ml,
        standardize_hedonic=standardize_hedonic,
        target=ds.target_name,
    )
