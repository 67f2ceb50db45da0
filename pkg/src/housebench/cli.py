"""Command-line front end.

Subcommands: synth, describe, compare, importance, pdp. A JSON config file
names exactly one data source (a CSV + schema pair, or a synthetic-generator
block) plus pipeline options and the experiment plan. Unknown config keys are
errors.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 model failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import forest, plots
from .data import Dataset, describe, load_csv, save_csv, save_schema, split
from .errors import ConfigError, DataError, ModelError
from .evaluation import ExperimentPlan, default_grids, fit_model, grid_search, run_experiment
from .preprocess import PipelineOptions, fit_pipeline
from .synth import GeneratorConfig, generate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_MODEL = 3


@dataclass
class RunConfig:
    csv_path: str | None = None
    schema_path: str | None = None
    synthetic: GeneratorConfig | None = None
    pipeline: PipelineOptions = field(default_factory=PipelineOptions)
    plan: ExperimentPlan = field(default_factory=ExperimentPlan)
    output_dir: str = "out"
    plots: bool = True


def _require_keys(doc: dict, allowed: set[str], context: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {context}: {sorted(unknown)}")


def parse_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} does not parse: {exc}")
    _require_keys(doc, {"data", "synthetic", "pipeline", "plan", "output_dir", "plots"},
                  "config")
    cfg = RunConfig()
    if ("data" in doc) == ("synthetic" in doc):
        raise ConfigError("config must specify exactly one of 'data' or 'synthetic'")
    if "data" in doc:
        _require_keys(doc["data"], {"csv", "schema"}, "data")
        try:
            cfg.csv_path = doc["data"]["csv"]
            cfg.schema_path = doc["data"]["schema"]
        except KeyError as exc:
            raise ConfigError(f"data block is missing key {exc}")
    else:
        _require_keys(doc["synthetic"],
                      {"n", "seed", "noise_std", "missing_rate", "outlier_rate"},
                      "synthetic")
        cfg.synthetic = GeneratorConfig(**doc["synthetic"])
    if "pipeline" in doc:
        _require_keys(doc["pipeline"],
                      {"winsor_upper_q", "two_sided_winsor", "r_threshold",
                       "gvif_cutoff", "log_regressors", "screen"}, "pipeline")
        block = dict(doc["pipeline"])
        if "log_regressors" in block:
            block["log_regressors"] = tuple(block["log_regressors"])
        cfg.pipeline = PipelineOptions(**block)
    if "plan" in doc:
        _require_keys(doc["plan"],
                      {"models", "repeats", "base_seed", "fractions", "grids",
                       "fixed_params"}, "plan")
        block = dict(doc["plan"])
        if "models" in block:
            block["models"] = tuple(block["models"])
        if "fractions" in block:
            block["fractions"] = tuple(block["fractions"])
        if "grids" in block:
            grids = default_grids()
            grids.update(block["grids"])
            block["grids"] = grids
        try:
            cfg.plan = ExperimentPlan(**block)
        except ModelError as exc:
            raise ConfigError(str(exc))
    cfg.output_dir = doc.get("output_dir", "out")
    cfg.plots = bool(doc.get("plots", True))
    return cfg


def load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.synthetic is not None:
        return generate(cfg.synthetic).dataset
    return load_csv(cfg.csv_path, cfg.schema_path)


def _out_dir(cfg: RunConfig, override) -> Path:
    out = Path(override) if override else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_synth(cfg: RunConfig, out: Path) -> int:
    if cfg.synthetic is None:
        raise ConfigError("synth requires a 'synthetic' config block")
    bundle = generate(cfg.synthetic)
    save_csv(bundle.dataset, out / "synthetic.csv")
    save_schema(bundle.dataset.schema, out / "synthetic.schema.json")
    bundle.truth.to_json(out / "ground_truth.json")
    print(f"wrote {out / 'synthetic.csv'} ({bundle.dataset.n} rows)")
    return EXIT_OK


def cmd_describe(cfg: RunConfig, out: Path) -> int:
    ds = load_dataset(cfg)
    stats = describe(ds)
    lines = []
    lines.append("column,stat,value")
    for name, s in stats.numeric.items():
        for stat in ("mean", "std", "min", "max", "cv"):
            v = getattr(s, stat)
            lines.append(f"{name},{stat},{'' if v is None else repr(v)}")
        lines.append(f"{name},n_missing,{s.n_missing}")
    for name, levels in stats.categorical.items():
        for level, count, pct in levels:
            lines.append(f"{name},level {level},{count} ({pct:.2f}%)")
    text = "\n".join(lines) + "\n"
    (out / "describe.csv").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_compare(cfg: RunConfig, out: Path) -> int:
    ds = load_dataset(cfg)
    report = run_experiment(cfg.plan, ds, cfg.pipeline)
    report.to_json(out / "report.json")
    report.write_table(out / "comparison.csv")
    print(f"wrote {out / 'report.json'} and {out / 'comparison.csv'}")
    for key, res in sorted(report.paired_tests.items()):
        print(f"paired t ({key}, test rmse): t={res['t']:.3f} p={res['p']:.4g}")
    if cfg.plots:
        plots.predicted_vs_actual(report.example_actual, report.example_predictions,
                                  out / "predicted_vs_actual.svg")
        if "ann" in cfg.plan.models:
            _plot_ann_loss(cfg, ds, out)
        if "rf" in cfg.plan.models:
            _importance_and_pdp(cfg, ds, out, write_importance_files=False)
    return EXIT_OK


def _fit_rf_on_base_split(cfg: RunConfig, ds: Dataset):
    parts = split(ds, cfg.plan.fractions, cfg.plan.base_seed).partitions()
    pipe = fit_pipeline(ds, parts["train"], cfg.pipeline)
    dm_train = pipe.build_design(ds, parts["train"], coding="ml")
    dm_val = pipe.build_design(ds, parts["validation"], coding="ml")
    result = grid_search("rf", cfg.plan.grids["rf"], dm_train, dm_val,
                         seed=cfg.plan.base_seed)
    return pipe, dm_train, dm_val, result.model


def _plot_ann_loss(cfg: RunConfig, ds: Dataset, out: Path) -> None:
    parts = split(ds, cfg.plan.fractions, cfg.plan.base_seed).partitions()
    pipe = fit_pipeline(ds, parts["train"], cfg.pipeline)
    dm_train = pipe.build_design(ds, parts["train"], coding="ml")
    dm_val = pipe.build_design(ds, parts["validation"], coding="ml")
    result = grid_search("ann", cfg.plan.grids["ann"], dm_train, dm_val,
                         seed=cfg.plan.base_seed)
    plots.loss_curve(result.model.artifact.history, out / "ann_loss.svg")


def _importance_and_pdp(cfg: RunConfig, ds: Dataset, out: Path,
                        write_importance_files: bool = True,
                        grid_points: int = 20) -> None:
    pipe, dm_train, dm_val, model = _fit_rf_on_base_split(cfg, ds)
    rng = np.random.default_rng(cfg.plan.base_seed)
    entries = forest.permutation_importance(model.predict, dm_val, repeats=10, rng=rng)
    if write_importance_files:
        forest.write_importance(entries, out / "importance.csv")
    plots.importance_bars(entries, out / "importance.svg")

    numeric = set(pipe.numeric_features)
    top_numeric = [e.feature for e in entries if e.feature in numeric][:3]
    curves = {}
    for feature in top_numeric:
        cols = dict(dm_val.feature_groups())[feature]
        col = dm_val.X[:, cols[0]]
        grid = np.linspace(col.min(), col.max(), grid_points)
        curve = forest.partial_dependence(model.predict, dm_val, feature, grid)
        curves[feature] = curve
        if write_importance_files:
            forest.write_pdp(curve, out / f"pdp_{feature.replace(' ', '_')}.csv", feature)
    if curves:
        plots.pdp_curves(curves, out / "pdp.svg")


def cmd_importance(cfg: RunConfig, out: Path) -> int:
    if "rf" not in cfg.plan.models:
        raise ConfigError("importance requires the rf model in the plan roster")
    ds = load_dataset(cfg)
    pipe, dm_train, dm_val, model = _fit_rf_on_base_split(cfg, ds)
    rng = np.random.default_rng(cfg.plan.base_seed)
    entries = forest.permutation_importance(model.predict, dm_val, repeats=10, rng=rng)
    forest.write_importance(entries, out / "importance.csv")
    if cfg.plots:
        plots.importance_bars(entries, out / "importance.svg")
    for e in entries:
        print(f"{e.feature}: {e.delta_mse:.6f}")
    return EXIT_OK


def cmd_pdp(cfg: RunConfig, out: Path) -> int:
    if "rf" not in cfg.plan.models:
        raise ConfigError("pdp requires the rf model in the plan roster")
    ds = load_dataset(cfg)
    _importance_and_pdp(cfg, ds, out, write_importance_files=True)
    print(f"wrote partial-dependence tables to {out}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "describe": cmd_describe,
    "compare": cmd_compare,
    "importance": cmd_importance,
    "pdp": cmd_pdp,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="housebench",
        description="Housing-valuation model benchmark (hedonic OLS, neural net, "
                    "random forest, kNN)")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the plan's base seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--no-plots", action="store_true", help="suppress SVG output")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.no_plots:
            cfg.plots = False
        if args.seed is not None:
            plan = cfg.plan
            cfg.plan = ExperimentPlan(
                models=plan.models, repeats=plan.repeats, base_seed=args.seed,
                fractions=plan.fractions, grids=plan.grids,
                fixed_params=plan.fixed_params)
            if cfg.synthetic is not None:
                cfg.synthetic = GeneratorConfig(
                    n=cfg.synthetic.n, seed=args.seed,
                    noise_std=cfg.synthetic.noise_std,
                    missing_rate=cfg.synthetic.missing_rate,
                    outlier_rate=cfg.synthetic.outlier_rate)
        out = _out_dir(cfg, args.out)
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
