"""Benchmark protocol: metrics, validation-fold tuning, repeated splits,
paired t-tests, and report assembly.

Each repeat reshuffles all three partitions with seed = base_seed + repeat,
refits the preprocessing pipeline on the new training rows, tunes every
model on the validation fold, and records train/validation/test metrics.
Pairwise paired t-tests compare per-repeat test RMSE.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import ann, forest, hedonic, knn
from .data import Dataset, split
from .errors import ModelError
from .preprocess import DesignMatrix, PipelineFit, PipelineOptions, fit_pipeline
from .stats import t_sf_two_sided

MODEL_FAMILIES = ("hp", "ann", "rf", "knn")
PARTITIONS = ("train", "validation", "test")
METRIC_NAMES = ("rmse", "mae", "mape", "r2")


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricSet:
    rmse: float
    mae: float
    mape: float  # percent
    r2: float

    def as_dict(self) -> dict[str, float]:
        return {"rmse": self.rmse, "mae": self.mae, "mape": self.mape, "r2": self.r2}


def metrics(y: np.ndarray, y_hat: np.ndarray) -> MetricSet:
    """RMSE, MAE, MAPE (percent), and R^2 about the mean of y."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise ModelError(f"metrics: length mismatch {y.shape} vs {y_hat.shape}")
    err = y - y_hat
    rmse = float(np.sqrt(np.mean(err ** 2)))
    mae = float(np.mean(np.abs(err)))
    if np.any(y == 0):
        raise ModelError("MAPE undefined: target contains zeros")
    mape = float(100.0 * np.mean(np.abs(err / y)))
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0:
        raise ModelError("R^2 undefined: target has zero variance")
    r2 = 1.0 - float(np.sum(err ** 2)) / sst
    return MetricSet(rmse=rmse, mae=mae, mape=mape, r2=r2)


# ---------------------------------------------------------------------------
# paired t-test
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairedTResult:
    t: float
    p: float
    df: int
    degenerate: bool = False  # zero-variance difference with nonzero mean


def paired_t_test(a, b) -> PairedTResult:
    """Two-sided paired t-test with m-1 degrees of freedom."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ModelError("paired_t_test needs two equal-length vectors")
    m = a.size
    if m < 2:
        raise ModelError("paired_t_test needs at least 2 pairs")
    d = a - b
    sd = float(np.std(d, ddof=1))
    mean = float(np.mean(d))
    if sd == 0.0:
        if mean == 0.0:
            return PairedTResult(t=0.0, p=1.0, df=m - 1)
        return PairedTResult(t=math.copysign(math.inf, mean), p=0.0, df=m - 1,
                             degenerate=True)
    t = mean / (sd / math.sqrt(m))
    return PairedTResult(t=t, p=t_sf_two_sided(t, m - 1), df=m - 1)


# ---------------------------------------------------------------------------
# model adapters: one fit/predict surface across the four families
# ---------------------------------------------------------------------------

def default_grids() -> dict[str, list[dict]]:
    """Desk-scale hyperparameter grids used when a plan does not override."""
    return {
        "hp": [{}],
        "ann": [{"hidden_layers": 1, "units_per_layer": 32, "learning_rate": 0.01,
                 "max_epochs": 400, "early_stop_patience": 30, "l2_lambda": 0.001}],
        "rf": [{"n_trees": 100, "mtry": None, "min_leaf": 5}],
        "knn": [{"k": 3}, {"k": 5}, {"k": 7}, {"k": 11}],
    }


class FittedModel:
    """Uniform predict contract over the four model artifacts."""

    def __init__(self, family: str, artifact, params: dict):
        self.family = family
        self.artifact = artifact
        self.params = params

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.family == "hp":
            return self.artifact.predict(X)
        if self.family == "ann":
            return ann.forward(self.artifact, X)
        return self.artifact.predict(X)


def fit_model(family: str, params: dict, dm_train: DesignMatrix,
              dm_validation: DesignMatrix | None, seed: int) -> FittedModel:
    if family == "hp":
        return FittedModel(family, hedonic.fit_ols(dm_train), params)
    if family == "ann":
        if dm_validation is None:
            raise ModelError("the neural net needs a validation design for early stopping")
        cfg = ann.NetworkConfig(seed=seed, **params)
        return FittedModel(family, ann.train(cfg, dm_train, dm_validation), params)
    if family == "rf":
        cfg = forest.ForestConfig(seed=seed, **params)
        return FittedModel(family, forest.fit_forest(dm_train, cfg), params)
    if family == "knn":
        cfg = knn.KnnConfig(**params)
        return FittedModel(family, knn.fit(dm_train, cfg), params)
    raise ModelError(f"unknown model family {family!r}")


@dataclass(frozen=True)
class GridResult:
    best_params: dict
    best_mse: float
    model: FittedModel
    skipped: list[str]


def grid_search(family: str, grid: list[dict], dm_train: DesignMatrix,
                dm_validation: DesignMatrix, seed: int = 0) -> GridResult:
    """Train one model per grid point, pick the lowest validation MSE.

    Ties keep the earlier grid point. A failing grid point is skipped with a
    warning; if every point fails the search raises.
    """
    if not grid:
        raise ModelError("grid_search needs a non-empty grid")
    best: GridResult | None = None
    skipped: list[str] = []
    for params in grid:
        try:
            model = fit_model(family, params, dm_train, dm_validation, seed)
            pred = model.predict(dm_validation.X)
            mse = float(np.mean((dm_validation.y - pred) ** 2))
        except ModelError as exc:
            note = f"{family} grid point {params}: {exc}"
            warnings.warn(note)
            skipped.append(note)
            continue
        if best is None or mse < best.best_mse:
            best = GridResult(params, mse, model, [])
    if best is None:
        raise ModelError(f"every {family} grid point failed: {skipped}")
    return GridResult(best.best_params, best.best_mse, best.model, skipped)


# ---------------------------------------------------------------------------
# experiment plan and report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentPlan:
    models: tuple[str, ...] = MODEL_FAMILIES
    repeats: int = 20
    base_seed: int = 0
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    grids: dict[str, list[dict]] = field(default_factory=default_grids)
    fixed_params: dict[str, dict] = field(default_factory=dict)  # skip tuning when set

    def __post_init__(self):
        unknown = set(self.models) - set(MODEL_FAMILIES)
        if unknown:
            raise ModelError(f"unknown model families {sorted(unknown)}")
        if self.repeats < 2:
            raise ModelError("the paired test needs repeats >= 2")


@dataclass(frozen=True)
class ComparisonReport:
    models: tuple[str, ...]
    repeats: int
    base_seed: int
    # per_repeat[family][partition][metric] -> list over repeats
    per_repeat: dict[str, dict[str, dict[str, list[float]]]]
    chosen_params: dict[str, list[dict]]
    avg_params: dict[str, dict[str, float]]
    paired_tests: dict[str, dict]  # "a_vs_b" on test RMSE
    example_actual: list[float]
    example_predictions: dict[str, list[float]]

    def aggregate(self, family: str, partition: str, metric: str) -> tuple[float, float]:
        vals = np.array(self.per_repeat[family][partition][metric])
        sd = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
        return float(np.mean(vals)), sd

    def to_dict(self) -> dict:
        aggregates = {
            fam: {part: {m: {"mean": self.aggregate(fam, part, m)[0],
                             "std": self.aggregate(fam, part, m)[1]}
                         for m in METRIC_NAMES}
                  for part in PARTITIONS}
            for fam in self.models
        }
        return {
            "models": list(self.models),
            "repeats": self.repeats,
            "base_seed": self.base_seed,
            "per_repeat": self.per_repeat,
            "aggregates": aggregates,
            "chosen_params": self.chosen_params,
            "avg_params": self.avg_params,
            "paired_tests": self.paired_tests,
            "example_actual": self.example_actual,
            "example_predictions": self.example_predictions,
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_table(self, path) -> None:
        """CSV comparison table: metric rows, model x partition columns,
        cells 'mean (std)'."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            header = ["metric"]
            for fam in self.models:
                header += [f"{fam} {part}" for part in PARTITIONS]
            writer.writerow(header)
            for metric in METRIC_NAMES:
                row = [metric]
                for fam in self.models:
                    for part in PARTITIONS:
                        mean, sd = self.aggregate(fam, part, metric)
                        row.append(f"{mean:.4f} ({sd:.4f})")
                writer.writerow(row)


def _design_for(family: str, fit: PipelineFit, ds: Dataset, idx) -> DesignMatrix:
    coding = "hedonic" if family == "hp" else "ml"
    return fit.build_design(ds, idx, coding=coding)


def run_experiment(plan: ExperimentPlan, ds: Dataset,
                   options: PipelineOptions = PipelineOptions()) -> ComparisonReport:
    """Execute the full repeated-split comparison protocol."""
    per_repeat: dict[str, dict[str, dict[str, list[float]]]] = {
        fam: {part: {m: [] for m in METRIC_NAMES} for part in PARTITIONS}
        for fam in plan.models
    }
    chosen: dict[str, list[dict]] = {fam: [] for fam in plan.models}
    example_actual: list[float] = []
    example_predictions: dict[str, list[float]] = {}

    for r in range(plan.repeats):
        seed = plan.base_seed + r
        parts = split(ds, plan.fractions, seed).partitions()
        pipe = fit_pipeline(ds, parts["train"], options)
        for family in plan.models:
            designs = {part: _design_for(family, pipe, ds, idx)
                       for part, idx in parts.items()}
            try:
                if family in plan.fixed_params:
                    params = plan.fixed_params[family]
                    model = fit_model(family, params, designs["train"],
                                      designs["validation"], seed)
                else:
                    result = grid_search(family, plan.grids[family],
                                         designs["train"], designs["validation"], seed)
                    params, model = result.best_params, result.model
            except ModelError as exc:
                raise ModelError(f"repeat {r} (seed {seed}), model {family}: {exc}") from exc
            chosen[family].append(params)
            for part in PARTITIONS:
                dm = designs[part]
                ms = metrics(dm.y, model.predict(dm.X))
                for name, value in ms.as_dict().items():
                    per_repeat[family][part][name].append(value)
            if r == plan.repeats - 1:
                dm_test = designs["test"]
                head = min(20, dm_test.n)
                example_predictions[family] = [
                    float(v) for v in model.predict(dm_test.X[:head])]
                example_actual = [float(v) for v in dm_test.y[:head]]

    # across-repeat average of the numeric tuned hyperparameters
    avg_params: dict[str, dict[str, float]] = {}
    for family in plan.models:
        numeric_keys = sorted({
            k for ps in chosen[family] for k, v in ps.items()
            if isinstance(v, (int, float)) and not isinstance(v, bool)})
        avg_params[family] = {
            k: float(np.mean([ps[k] for ps in chosen[family] if k in ps]))
            for k in numeric_keys
        }

    paired: dict[str, dict] = {}
    for i, fam_a in enumerate(plan.models):
        for fam_b in plan.models[i + 1:]:
            res = paired_t_test(per_repeat[fam_a]["test"]["rmse"],
                                per_repeat[fam_b]["test"]["rmse"])
            paired[f"{fam_a}_vs_{fam_b}"] = {
                "metric": "test rmse", "t": res.t, "p": res.p,
                "df": res.df, "degenerate": res.degenerate,
            }

    return ComparisonReport(
        models=plan.models, repeats=plan.repeats, base_seed=plan.base_seed,
        per_repeat=per_repeat, chosen_params=chosen, avg_params=avg_params,
        paired_tests=paired, example_actual=example_actual,
        example_predictions=example_predictions,
    )
