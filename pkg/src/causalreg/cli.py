"""Command-line entry points.

Every command reads a JSON run configuration (``--config``), applies the
command-line overrides, validates the result before touching the disk,
and writes its outputs into a temporary directory that is renamed onto
the configured output directory only when the command succeeds.

    causalreg synth --config synth.json          # data files + a runnable config
    causalreg grid --config out/config.json      # grid search + baselines
    causalreg train --config run.json --lambda-s 100
    causalreg eval --config run.json --model out/model.json
    causalreg sweep --config run.json
    causalreg annotate-export --config run.json  # features to label by hand

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .core import PenaltyConfig
from .data.bundle import DatasetBundle
from .data.embeddings import GroupWeights, embed_bundle, load_glove, write_glove
from .data.synthetic import (
    ADMISSION_GROUPS,
    ADMISSION_SCHEMA,
    SynthConfig,
    synth_admission,
    synth_admission_records,
    synth_corpus,
    synth_embeddings,
    synth_generate,
    synth_group_spec,
)
from .data.tabular import build_tabular_bundle, load_records, load_schema
from .data.text import build_text_bundle, load_rated_reviews, load_text_corpus, write_text_corpus
from .errors import CausalRegError, ConfigError, DataError, NumericalError
from .experiments import (
    GRID_VALUES,
    SELECTIONS,
    ExperimentReport,
    GridSpec,
    aggregate,
    evaluate,
    fit,
    grid_search,
    lambda_sweep,
    repeat_seeds,
    run_baselines,
    SettingResult,
)
from .io import SavedModel, atomic_output_dir, dump_json, load_model, save_model
from .metrics import top_features
from .optim import TrainConfig

log = logging.getLogger("causalreg")

FORMATS = ("text", "kindle", "tabular", "synthetic")
REPRESENTATIONS = ("bow", "glove", "glove_weighted", "tabular")
BASELINES = ("l2_bow", "l2_glove", "feature_selection", "data_augmentation")


# --------------------------------------------------------------------------
# configuration


@dataclass
class DatasetConfig:
    format: str = "synthetic"
    path: Optional[str] = None
    schema: Optional[str] = None
    groups: Optional[str] = None
    embeddings: Optional[str] = None
    min_df: int = 1
    split_seed: int = 0
    synthetic: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    representation: str = "bow"
    embedding_weights: tuple = (1.0, 1.0, 1.0)
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    grid: GridSpec = field(default_factory=GridSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    selection: str = "ctf_validation"
    seeds: int = 1
    baselines: tuple = ("l2_bow",)
    baseline_selection: str = "validation_accuracy"
    baseline_values: tuple = GRID_VALUES
    sweep_values: tuple = GRID_VALUES
    sweep_seeds: int = 3
    annotate_threshold: float = 1.0
    annotate_lambda: float = 0.0
    model: Optional[str] = None
    output: str = "out"
    jobs: int = 1


def _check_keys(section: str, data: dict, allowed) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{section}: unknown field(s) {unknown}; allowed: {sorted(allowed)}")


def _resolve(base: Path, value: Optional[str]) -> Optional[str]:
    if value is None:
        return None
    p = Path(value)
    return str(p if p.is_absolute() else base / p)


def _field(section: str, build, *args, **kwargs):
    try:
        return build(*args, **kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{section}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from None


def parse_config(data: dict, base: Path = Path(".")) -> RunConfig:
    """Turn a JSON object into a validated RunConfig; paths are relative to `base`."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys("config", data, [f.name for f in fields(RunConfig)])
    ds = dict(data.get("dataset", {}))
    _check_keys("dataset", ds, [f.name for f in fields(DatasetConfig)])
    for key in ("path", "schema", "groups", "embeddings"):
        ds[key] = _resolve(base, ds.get(key))
    dataset = _field("dataset", DatasetConfig, **ds)

    pen = data.get("penalty", {})
    if isinstance(pen, (list, tuple)):
        pen = dict(zip(("lambda_c", "lambda_s", "lambda_r"), pen))
    _check_keys("penalty", pen, ("lambda_c", "lambda_s", "lambda_r"))
    penalty = _field("penalty", PenaltyConfig, **pen)

    grid = dict(data.get("grid", {}))
    _check_keys("grid", grid, ("lambda_c", "lambda_s", "lambda_r", "constraint"))
    for axis in ("lambda_c", "lambda_s", "lambda_r"):
        if axis in grid:
            grid[axis] = tuple(float(v) for v in grid[axis])
    grid_spec = _field("grid", GridSpec, **grid)

    tr = data.get("train", {})
    _check_keys("train", tr, [f.name for f in fields(TrainConfig)])
    tcfg = _field("train", TrainConfig, **tr)

    rest = {k: v for k, v in data.items() if k not in ("dataset", "penalty", "grid", "train")}
    for key in ("embedding_weights", "baselines", "baseline_values", "sweep_values"):
        if key in rest:
            rest[key] = tuple(rest[key])
    rest["model"] = _resolve(base, rest.get("model"))
    rest["output"] = _resolve(base, rest.get("output", "out"))
    cfg = RunConfig(dataset=dataset, penalty=penalty, grid=grid_spec, train=tcfg, **rest)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    ds = cfg.dataset
    if ds.format not in FORMATS:
        raise ConfigError(f"dataset.format must be one of {FORMATS}, got {ds.format!r}")
    if cfg.representation not in REPRESENTATIONS:
        raise ConfigError(f"representation must be one of {REPRESENTATIONS}, got {cfg.representation!r}")
    text_like = ds.format in ("text", "kindle")
    tabular = ds.format == "tabular" or (
        ds.format == "synthetic" and ds.synthetic.get("kind") == "admission"
    )
    if tabular != (cfg.representation == "tabular"):
        raise ConfigError(
            f"representation {cfg.representation!r} does not fit dataset format {ds.format!r}: "
            "tabular data (including synthetic admission data) needs 'tabular', text data does not"
        )
    if cfg.representation.startswith("glove"):
        if not text_like:
            raise ConfigError(f"representation {cfg.representation!r} needs a text dataset")
        if ds.embeddings is None:
            raise ConfigError(f"representation {cfg.representation!r} needs dataset.embeddings")
    needed = {"path": ds.format != "synthetic", "schema": ds.format == "tabular"}
    for key, required in needed.items():
        if required and getattr(ds, key) is None:
            raise ConfigError(f"dataset.{key} is required for format {ds.format!r}")
    for key in ("path", "schema", "groups", "embeddings"):
        value = getattr(ds, key)
        if value is not None and not Path(value).is_file():
            raise ConfigError(f"dataset.{key}: file not found: {value}")
    if ds.format == "synthetic":
        kind, _, opts = synth_options(ds.synthetic)
        if kind == "text":
            _field("dataset.synthetic", lambda: SynthConfig(**opts).check())
        elif opts.get("n", 40000) < 10:
            raise ConfigError(f"dataset.synthetic: n must be at least 10, got {opts['n']}")
    if ds.min_df < 1:
        raise ConfigError(f"dataset.min_df must be >= 1, got {ds.min_df}")
    if len(cfg.embedding_weights) != 3:
        raise ConfigError("embedding_weights must have three entries (causal, spurious, remaining)")
    _field("embedding_weights", GroupWeights, *cfg.embedding_weights)
    for key in ("selection", "baseline_selection"):
        if getattr(cfg, key) not in SELECTIONS:
            raise ConfigError(f"{key} must be one of {SELECTIONS}, got {getattr(cfg, key)!r}")
    bad = [b for b in cfg.baselines if b not in BASELINES]
    if bad:
        raise ConfigError(f"baselines: unknown name(s) {bad}; allowed: {list(BASELINES)}")
    for key in ("seeds", "sweep_seeds", "jobs"):
        if not isinstance(getattr(cfg, key), int) or getattr(cfg, key) < 1:
            raise ConfigError(f"{key} must be a positive integer, got {getattr(cfg, key)!r}")
    for key in ("baseline_values", "sweep_values"):
        if not getattr(cfg, key) or any(not np.isfinite(v) or v < 0 for v in getattr(cfg, key)):
            raise ConfigError(f"{key} must be a non-empty list of non-negative numbers")
    if not cfg.annotate_threshold >= 0:
        raise ConfigError(f"annotate_threshold must be >= 0, got {cfg.annotate_threshold}")
    _field("annotate_lambda", PenaltyConfig.uniform, cfg.annotate_lambda)
    if cfg.model is not None and not Path(cfg.model).is_file():
        raise ConfigError(f"model: file not found: {cfg.model}")


SYNTH_KINDS = ("text", "admission")
ADMISSION_OPTIONS = ("n", "merit_gap", "label_bias", "score_noise", "decision_noise", "cutoff")


def synth_options(opts: dict) -> tuple[str, int, dict]:
    """Split a `dataset.synthetic` object into (kind, seed, generator keyword arguments)."""
    opts = dict(opts)
    kind = opts.pop("kind", "text")
    if kind not in SYNTH_KINDS:
        raise ConfigError(f"dataset.synthetic.kind must be one of {SYNTH_KINDS}, got {kind!r}")
    seed = opts.pop("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError(f"dataset.synthetic.seed must be an integer, got {seed!r}")
    allowed = [f.name for f in fields(SynthConfig)] if kind == "text" else ADMISSION_OPTIONS
    _check_keys(f"dataset.synthetic ({kind})", opts, allowed)
    return kind, seed, opts


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(data, path.parent)


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    pen = dict(zip(("lambda_c", "lambda_s", "lambda_r"), cfg.penalty.as_tuple()))
    grid = cfg.grid
    for axis in ("lambda_c", "lambda_s", "lambda_r"):
        value = getattr(args, axis, None)
        if value is not None:
            pen[axis] = value
            grid = replace(grid, **{axis: (value,)})
    cfg = replace(cfg, penalty=_field("penalty", PenaltyConfig, **pen), grid=grid)
    if args.seed is not None:
        cfg = replace(cfg, train=replace(cfg.train, seed=args.seed))
    if args.jobs is not None:
        cfg = replace(cfg, jobs=args.jobs)
    if args.output is not None:
        cfg = replace(cfg, output=args.output)
    if getattr(args, "model", None) is not None:
        cfg = replace(cfg, model=args.model)
    validate_config(cfg)
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    out = asdict(cfg)
    out["penalty"] = dict(zip(("lambda_c", "lambda_s", "lambda_r"), cfg.penalty.as_tuple()))
    return out


# --------------------------------------------------------------------------
# data


def _read_groups(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(spec, dict):
        raise ConfigError(f"{path}: feature-group file must be a JSON object")
    _check_keys(f"groups file {path}", spec, ("causal", "spurious"))
    return spec


def load_bundle(cfg: RunConfig, saved: Optional[SavedModel] = None) -> DatasetBundle:
    """Build the dataset bundle a config describes.

    With `saved`, the vocabulary, schema and embeddings stored in the
    model file are reused so features line up with the trained weights.
    """
    ds = cfg.dataset
    if ds.format == "synthetic":
        kind, seed, opts = synth_options(ds.synthetic)
        if kind == "admission":
            return synth_admission(seed, **opts)
        return synth_generate(seed, SynthConfig(**opts))
    groups = _read_groups(ds.groups)
    if ds.format == "tabular":
        schema = saved.schema if saved is not None and saved.schema is not None else load_schema(ds.schema)
        return build_tabular_bundle(
            load_records(ds.path), schema, groups, split_seed=ds.split_seed, refit=saved is None
        )
    corpus = load_text_corpus(ds.path) if ds.format == "text" else load_rated_reviews(ds.path)
    vocab = saved.vocabulary if saved is not None else None
    bundle = build_text_bundle(corpus, groups, min_df=ds.min_df, vocab=vocab)
    if cfg.representation == "bow":
        return bundle
    if saved is not None:
        table, weights = saved.embeddings, saved.embedding_weights
        bundle = replace(bundle, groups=saved.token_groups)
    else:
        table = load_glove(ds.embeddings, bundle.feature_names)
        weights = GroupWeights(*cfg.embedding_weights) if cfg.representation == "glove_weighted" else GroupWeights()
    out = embed_bundle(bundle, table, weights)
    out.meta.update(token_bundle=bundle, embedding_table=table)
    return out


def _embeddings_for_baselines(cfg: RunConfig, bundle: DatasetBundle):
    if "l2_glove" not in cfg.baselines or cfg.dataset.embeddings is None:
        return None
    return load_glove(cfg.dataset.embeddings, bundle.feature_names)


def _saved(cfg: RunConfig, bundle: DatasetBundle, model, penalty: PenaltyConfig) -> SavedModel:
    saved = SavedModel(
        model=model,
        feature_names=list(bundle.feature_names),
        groups=bundle.groups,
        penalty=penalty,
        representation=cfg.representation,
        meta={"version": __version__, "kind": bundle.kind, "seed": cfg.train.seed},
    )
    if bundle.kind == "tabular":
        saved.schema = bundle.encoder
    elif bundle.kind == "text":
        saved.vocabulary = bundle.encoder
    elif bundle.kind == "embedding":
        tokens = bundle.meta["token_bundle"]
        saved.vocabulary = tokens.encoder
        saved.embeddings = bundle.meta["embedding_table"]
        saved.embedding_weights = GroupWeights(*bundle.meta["embedding_weights"])
        saved.token_groups = tokens.groups
        saved.token_names = list(tokens.feature_names)
    return saved


# --------------------------------------------------------------------------
# commands


def _write_report(out: Path, report: ExperimentReport) -> None:
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")


def _single_report(cfg: RunConfig, result: SettingResult) -> ExperimentReport:
    return ExperimentReport(
        settings=[result],
        selection={"criterion": "fixed", "lambdas": list(result.lambdas), "score": None, "index": 0},
        config=config_to_dict(cfg),
    )


def cmd_train(cfg: RunConfig) -> ExperimentReport:
    bundle = load_bundle(cfg)
    result = fit(bundle, cfg.penalty, cfg.train)
    setting = repeat_seeds(bundle, cfg.penalty, cfg.train, k=cfg.seeds, n_jobs=cfg.jobs)
    report = _single_report(cfg, setting)
    with atomic_output_dir(cfg.output) as out:
        save_model(_saved(cfg, bundle, result.model, cfg.penalty), out / "model.json")
        _write_report(out, report)
    return report


def cmd_eval(cfg: RunConfig) -> ExperimentReport:
    if cfg.model is None:
        raise ConfigError("eval needs a model file (config 'model' or --model)")
    saved = load_model(cfg.model)
    if saved.representation != cfg.representation:
        raise ConfigError(
            f"model was trained on representation {saved.representation!r}, config says {cfg.representation!r}"
        )
    bundle = load_bundle(cfg, saved)
    if bundle.feature_names != saved.feature_names:
        raise DataError("dataset features do not match the model's features")
    bundle = replace(bundle, groups=saved.groups)
    metrics = {"seed": saved.meta.get("seed", 0), **evaluate(saved.model, bundle)}
    agg = aggregate([metrics])
    setting = SettingResult(
        saved.penalty.as_tuple(), [metrics["seed"]], [metrics], agg["mean"], agg["std"], agg["single_seed"]
    )
    report = _single_report(cfg, setting)
    with atomic_output_dir(cfg.output) as out:
        _write_report(out, report)
    return report


def cmd_grid(cfg: RunConfig) -> ExperimentReport:
    bundle = load_bundle(cfg)
    report = grid_search(bundle, cfg.grid, cfg.train, cfg.selection, k=cfg.seeds, n_jobs=cfg.jobs)
    if cfg.baselines:
        report.baselines = run_baselines(
            bundle,
            cfg.train,
            k=cfg.seeds,
            l2_values=cfg.baseline_values,
            selection=cfg.baseline_selection,
            embeddings=_embeddings_for_baselines(cfg, bundle),
            which=cfg.baselines,
            n_jobs=cfg.jobs,
        )
        done = {b.name for b in report.baselines}
        report.skipped_baselines = [name for name in cfg.baselines if name not in done]
    report.config = config_to_dict(cfg)
    best = PenaltyConfig(*report.best.lambdas)
    model = fit(bundle, best, cfg.train).model
    with atomic_output_dir(cfg.output) as out:
        save_model(_saved(cfg, bundle, model, best), out / "model.json")
        _write_report(out, report)
    return report


def cmd_sweep(cfg: RunConfig) -> ExperimentReport:
    bundle = load_bundle(cfg)
    sweep = lambda_sweep(bundle, cfg.train, cfg.sweep_values, k=cfg.sweep_seeds, n_jobs=cfg.jobs)
    report = ExperimentReport(sweep=sweep, config=config_to_dict(cfg))
    with atomic_output_dir(cfg.output) as out:
        _write_report(out, report)
    return report


def annotation_rows(weights, names: Sequence[str], threshold: float) -> list[tuple[str, float]]:
    """(feature, weight) with |weight| > threshold, by |weight| descending then index."""
    order = top_features(weights, len(weights))
    w = np.asarray(weights)
    return [(names[i], float(w[i])) for i in order if abs(w[i]) > threshold]


def cmd_annotate_export(cfg: RunConfig) -> list[tuple[str, float]]:
    bundle = load_bundle(cfg)
    if bundle.kind == "embedding":
        raise ConfigError("annotate-export needs interpretable features (bow or tabular)")
    penalty = PenaltyConfig.uniform(cfg.annotate_lambda)
    model = fit(bundle, penalty, cfg.train).model
    if not model.is_finite() or not np.any(model.weights):
        raise NumericalError("initial classifier is degenerate (all-zero or non-finite weights)")
    rows = annotation_rows(model.weights, bundle.feature_names, cfg.annotate_threshold)
    with atomic_output_dir(cfg.output) as out:
        lines = ["feature\tweight"] + [f"{name}\t{w!r}" for name, w in rows]
        (out / "annotation.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        info = {"threshold": cfg.annotate_threshold, "lambda": cfg.annotate_lambda, "n_features": len(rows)}
        (out / "annotation.json").write_text(dump_json(info), encoding="utf-8")
        save_model(_saved(cfg, bundle, model, penalty), out / "model.json")
    return rows


def cmd_synth(cfg: RunConfig, kind: Optional[str] = None) -> dict:
    """Write a synthetic dataset and a config that runs `grid` on it.

    Generator options come from `dataset.synthetic`; `kind` overrides its
    ``kind`` entry and the training seed (``--seed``) is the data seed
    unless `dataset.synthetic` names one.
    """
    opts = dict(cfg.dataset.synthetic)
    if kind is not None:
        opts["kind"] = kind
    opts.setdefault("seed", cfg.train.seed)
    kind, seed, opts = synth_options(opts)
    with atomic_output_dir(cfg.output) as out:
        if kind == "text":
            bundle = synth_generate(seed, SynthConfig(**opts))
            write_text_corpus(synth_corpus(bundle), out / "corpus.tsv")
            (out / "groups.json").write_text(dump_json(synth_group_spec(bundle)), encoding="utf-8")
            write_glove(synth_embeddings(bundle.feature_names, seed=seed), out / "glove.txt")
            run = {
                "dataset": {"format": "text", "path": "corpus.tsv", "groups": "groups.json", "embeddings": "glove.txt"},
                "representation": "bow",
                "selection": "ctf_validation",
                "baselines": list(BASELINES),
            }
        else:
            records = synth_admission_records(seed, **opts)
            header = list(records[0])
            lines = [",".join(header)] + [",".join(r[c] for c in header) for r in records]
            (out / "admission.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
            (out / "schema.json").write_text(dump_json({"columns": ADMISSION_SCHEMA}), encoding="utf-8")
            (out / "groups.json").write_text(dump_json(ADMISSION_GROUPS), encoding="utf-8")
            run = {
                "dataset": {"format": "tabular", "path": "admission.csv", "schema": "schema.json",
                            "groups": "groups.json", "split_seed": seed},
                "representation": "tabular",
                "selection": "fairness",
                "baselines": ["l2_bow"],
                "train": {"learning_rate": 0.1},
            }
        run.update(seeds=cfg.seeds, output="run", jobs=cfg.jobs)
        (out / "config.json").write_text(dump_json(run), encoding="utf-8")
    return run


# --------------------------------------------------------------------------
# entry point

COMMANDS = ("annotate-export", "train", "eval", "grid", "sweep", "synth")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causalreg", description="Grouped-penalty logistic regression.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration (defaults apply when omitted)")
        p.add_argument("--lambda-c", type=float, dest="lambda_c")
        p.add_argument("--lambda-s", type=float, dest="lambda_s")
        p.add_argument("--lambda-r", type=float, dest="lambda_r")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--output", help="output directory (overrides the config)")
        p.add_argument("-v", "--verbose", action="count", default=0)
        if name == "eval":
            p.add_argument("--model", help="model.json written by train or grid")
        if name == "synth":
            p.add_argument("--kind", choices=SYNTH_KINDS, help="dataset to generate (default: text)")
    return parser


def run(argv: Optional[Sequence[str]] = None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    cfg = load_config(args.config) if args.config else parse_config({})
    cfg = apply_overrides(cfg, args)
    handlers = {
        "train": cmd_train,
        "eval": cmd_eval,
        "grid": cmd_grid,
        "sweep": cmd_sweep,
        "annotate-export": cmd_annotate_export,
    }
    if args.command == "synth":
        return cmd_synth(cfg, args.kind)
    return handlers[args.command](cfg)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        run(argv)
    except CausalRegError as exc:
        print(f"causalreg: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"causalreg: error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
