"""Grid search, seed repetition, baselines and penalty sweeps."""

from __future__ import annotations

import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import LinearModel, PenaltyConfig, bce_loss
from .data.bundle import DatasetBundle, augment_with_counterfactuals
from .data.embeddings import EmbeddingTable, GroupWeights, embed_bundle
from .errors import ConfigError, DataError
from .metrics import accuracy, causal_fraction_topn, delta_dp, delta_eo, f1
from .optim import TrainConfig, TrainResult, train

log = logging.getLogger(__name__)

GRID_VALUES = (0.0, 0.0001, 0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0)
SELECTIONS = ("ctf_validation", "fairness", "validation_accuracy", "validation_loss")
FAIRNESS_ACCURACY_SLACK = 0.01
TOPN = (10, 30, 50)


def recommended_defaults() -> PenaltyConfig:
    """No penalty on causal, strong on spurious, moderate on remaining features."""
    return PenaltyConfig(0.0, 100.0, 10.0)


@dataclass
class GridSpec:
    lambda_c: Sequence[float] = GRID_VALUES
    lambda_s: Sequence[float] = GRID_VALUES
    lambda_r: Sequence[float] = GRID_VALUES
    constraint: str = "ordered"

    def __post_init__(self):
        if self.constraint not in ("ordered", "none"):
            raise ConfigError(f"constraint must be 'ordered' or 'none', got {self.constraint!r}")
        for axis in (self.lambda_c, self.lambda_s, self.lambda_r):
            if any(v < 0 for v in axis):
                raise ConfigError("grid values must be non-negative")

    @classmethod
    def single(cls, triple: Sequence[float], constraint: str = "none") -> "GridSpec":
        c, s, r = triple
        return cls((c,), (s,), (r,), constraint)

    def triples(self) -> list[PenaltyConfig]:
        """Admissible settings in ascending lexicographic (c, s, r) order."""
        out = []
        for c, s, r in itertools.product(
            sorted(set(self.lambda_c)), sorted(set(self.lambda_s)), sorted(set(self.lambda_r))
        ):
            cfg = PenaltyConfig(c, s, r)
            if self.constraint == "ordered" and not cfg.satisfies_ordering():
                continue
            out.append(cfg)
        return out


# --------------------------------------------------------------------------
# single runs


def evaluate(model: LinearModel, bundle: DatasetBundle) -> dict:
    """Every metric the bundle supports, as a flat dict of floats."""
    out: dict[str, float] = {}
    val, test = bundle.validation, bundle.test
    p_val = model.predict_proba(val.X)
    out["val_loss"] = bce_loss(p_val, val.y)
    out["val_accuracy"] = accuracy(p_val, val.y)
    p_test = model.predict_proba(test.X)
    out["test_accuracy"] = accuracy(p_test, test.y)
    out["test_f1"] = f1(p_test, test.y)
    if val.twin is not None:
        out["ctf_val_accuracy"] = accuracy(model.predict_proba(val.twin.X), val.twin.y)
    if test.twin is not None:
        out["ctf_test_accuracy"] = accuracy(model.predict_proba(test.twin.X), test.twin.y)
    if bundle.sensitive_values is not None:
        pair = bundle.sensitive_values
        out["val_delta_eo"] = delta_eo(p_val, val.y, val.sensitive, pair)
        out["val_delta_dp"] = delta_dp(p_val, val.sensitive, pair)
        out["test_delta_eo"] = delta_eo(p_test, test.y, test.sensitive, pair)
        out["test_delta_dp"] = delta_dp(p_test, test.sensitive, pair)
    if bundle.groups.causal:
        for n, frac in causal_fraction_topn(
            model, bundle.groups, [n for n in TOPN if n <= model.n_features]
        ).items():
            out[f"causal_top{n}"] = frac
    return out


def fit(bundle: DatasetBundle, cfg: PenaltyConfig, tcfg: TrainConfig, train_data=None) -> TrainResult:
    tr = train_data if train_data is not None else bundle.train
    return train(tr.X, tr.y, bundle.validation.X, bundle.validation.y, bundle.groups, cfg, tcfg)


def run_one(bundle: DatasetBundle, cfg: PenaltyConfig, tcfg: TrainConfig, train_data=None) -> dict:
    result = fit(bundle, cfg, tcfg, train_data)
    metrics = evaluate(result.model, bundle)
    metrics["epochs"] = float(result.epochs_run)
    return metrics


# --------------------------------------------------------------------------
# seed repetition


def seed_list(tcfg: TrainConfig, k: int) -> list[int]:
    if k < 1:
        raise ConfigError(f"need at least one seed, got {k}")
    return [tcfg.seed + i for i in range(k)]


def aggregate(per_seed: Sequence[dict]) -> dict:
    """Mean and sample std (ddof=1) per metric; std is 0 and flagged for one seed."""
    keys = [k for k in per_seed[0] if k not in ("seed",)]
    mean, std = {}, {}
    for key in keys:
        vals = np.array([row[key] for row in per_seed], dtype=np.float64)
        mean[key] = float(vals.mean())
        std[key] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    return {"mean": mean, "std": std, "single_seed": len(per_seed) < 2}


_WORKER_BUNDLE: Optional[DatasetBundle] = None


def _init_worker(bundle):
    global _WORKER_BUNDLE
    _WORKER_BUNDLE = bundle


def _worker(job):
    cfg, tcfg, variant = job
    return _run_job(_WORKER_BUNDLE, cfg, tcfg, variant)


def _run_job(bundle, cfg, tcfg, variant):
    train_data = augment_with_counterfactuals(bundle.train) if variant == "augment" else None
    return run_one(bundle, cfg, tcfg, train_data)


def run_jobs(bundle: DatasetBundle, jobs: list, n_jobs: int = 1) -> list[dict]:
    """Run (penalty, train config, variant) jobs; results keep job order."""
    if n_jobs <= 1 or len(jobs) <= 1:
        return [_run_job(bundle, *job) for job in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs, initializer=_init_worker, initargs=(bundle,)) as pool:
        return list(pool.map(_worker, jobs, chunksize=max(1, len(jobs) // (4 * n_jobs))))


@dataclass
class SettingResult:
    lambdas: tuple
    seeds: list
    per_seed: list
    mean: dict
    std: dict
    single_seed: bool
    name: str = ""

    def to_dict(self) -> dict:
        out = {"name": self.name} if self.name else {}
        out.update(
            lambdas=list(self.lambdas),
            seeds=list(self.seeds),
            mean=self.mean,
            std=self.std,
            single_seed=self.single_seed,
        )
        return out


def _settings(bundle, cfgs, tcfg, k, n_jobs, variant=None) -> list[SettingResult]:
    seeds = seed_list(tcfg, k)
    jobs = [(cfg, replace(tcfg, seed=s), variant) for cfg in cfgs for s in seeds]
    results = run_jobs(bundle, jobs, n_jobs)
    out = []
    for i, cfg in enumerate(cfgs):
        rows = results[i * k : (i + 1) * k]
        per_seed = [{"seed": s, **r} for s, r in zip(seeds, rows)]
        agg = aggregate(per_seed)
        out.append(SettingResult(cfg.as_tuple(), seeds, per_seed, agg["mean"], agg["std"], agg["single_seed"]))
    return out


def repeat_seeds(
    bundle: DatasetBundle,
    cfg: PenaltyConfig,
    tcfg: TrainConfig | None = None,
    k: int = 10,
    n_jobs: int = 1,
) -> SettingResult:
    """Train with seeds tcfg.seed .. tcfg.seed + k - 1 and summarize."""
    return _settings(bundle, [cfg], tcfg or TrainConfig(), k, n_jobs)[0]


# --------------------------------------------------------------------------
# selection


def resolve_selection(bundle: DatasetBundle, selection: str) -> str:
    if selection not in SELECTIONS:
        raise ConfigError(f"selection must be one of {SELECTIONS}, got {selection!r}")
    if selection == "ctf_validation" and bundle.validation.twin is None:
        log.warning("no counterfactual validation split; selecting on validation loss instead")
        return "validation_loss"
    if selection == "fairness" and bundle.sensitive_values is None:
        raise DataError("fairness selection needs a sensitive attribute")
    return selection


def select_best(results: Sequence[SettingResult], selection: str) -> tuple[int, float]:
    """Index of the winning setting and its score.

    `results` must be in ascending lexicographic (c, s, r) order so that the
    first of several exactly tied settings wins.
    """
    if not results:
        raise ConfigError("no candidate settings to select from")
    if selection == "fairness":
        best_acc = max(r.mean["val_accuracy"] for r in results)
        pool = [i for i, r in enumerate(results) if r.mean["val_accuracy"] >= best_acc - FAIRNESS_ACCURACY_SLACK]
        key = lambda i: results[i].mean["val_delta_eo"]  # noqa: E731
        best = pool[0]
        for i in pool[1:]:
            if key(i) < key(best):
                best = i
        return best, key(best)
    metric, sign = {
        "ctf_validation": ("ctf_val_accuracy", 1.0),
        "validation_accuracy": ("val_accuracy", 1.0),
        "validation_loss": ("val_loss", -1.0),
    }[selection]
    best = 0
    for i in range(1, len(results)):
        if sign * results[i].mean[metric] > sign * results[best].mean[metric]:
            best = i
    return best, results[best].mean[metric]


# --------------------------------------------------------------------------
# reports


@dataclass
class ExperimentReport:
    settings: list = field(default_factory=list)
    selection: dict = field(default_factory=dict)
    baselines: list = field(default_factory=list)
    sweep: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    skipped_baselines: list = field(default_factory=list)

    @property
    def best(self) -> Optional[SettingResult]:
        idx = self.selection.get("index")
        return None if idx is None else self.settings[idx]

    def to_dict(self) -> dict:
        best = self.best
        return {
            "version": 1,
            "config": self.config,
            "settings": [s.to_dict() for s in self.settings],
            "per_seed_metrics": [
                {"lambdas": list(s.lambdas), **row} for s in self.settings for row in s.per_seed
            ],
            "aggregate": {"mean": best.mean, "std": best.std} if best else {},
            "baselines": [b.to_dict() for b in self.baselines],
            "selection": {k: v for k, v in self.selection.items()},
            **({"skipped_baselines": self.skipped_baselines} if self.skipped_baselines else {}),
            **({"sweep": self.sweep} if self.sweep else {}),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def to_text(self) -> str:
        rows = [(b.name, b) for b in self.baselines]
        best = self.best
        rows += [("selected" if s is best else "", s) for s in self.settings]
        return format_table(rows) + _sweep_text(self.sweep)


def _fmt_lambdas(lams) -> str:
    return "(" + ",".join(f"{v:g}" for v in lams) + ")"


def format_table(rows: Sequence[tuple[str, SettingResult]]) -> str:
    """Aligned text table: one row per setting, mean +- std per metric."""
    metric_order = [
        "test_accuracy", "ctf_test_accuracy", "test_f1", "test_delta_eo", "test_delta_dp", "causal_top10",
    ]
    present = [m for m in metric_order if any(m in s.mean for _, s in rows)]
    header = ["model", "lambda_c,s,r"] + present
    lines = [header]
    for name, s in rows:
        cells = [name or "grouped", _fmt_lambdas(s.lambdas) if s.lambdas else "N/A"]
        for m in present:
            cells.append(f"{s.mean[m]:.3f} +- {s.std[m]:.3f}" if m in s.mean else "")
        lines.append(cells)
    widths = [max(len(r[i]) for r in lines) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in lines) + "\n"


def _sweep_text(sweep: dict) -> str:
    if not sweep:
        return ""
    out = ["", "lambda sweep (mean over seeds)"]
    for axis in ("lambda_c", "lambda_s", "lambda_r"):
        pts = sweep["points"].get(axis, [])
        cells = " ".join(
            f"{p['value']:g}:{p['test_accuracy']:.3f}/{p.get('ctf_test_accuracy', float('nan')):.3f}"
            for p in pts
        )
        change = sweep.get("max_ctf_change", {}).get(axis)
        label = f"max ctf change {change:.3f}" if change is not None else "max ctf change N/A"
        out.append(f"{axis}  {label}  {cells}")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# protocol


def grid_search(
    bundle: DatasetBundle,
    grid: GridSpec | None = None,
    tcfg: TrainConfig | None = None,
    selection: str = "ctf_validation",
    k: int = 10,
    n_jobs: int = 1,
) -> ExperimentReport:
    """Train every admissible setting for k seeds and pick the best one."""
    grid = grid or GridSpec()
    tcfg = tcfg or TrainConfig()
    cfgs = grid.triples()
    if not cfgs:
        raise ConfigError("grid has no admissible settings")
    criterion = resolve_selection(bundle, selection)
    results = _settings(bundle, cfgs, tcfg, k, n_jobs)
    idx, score = select_best(results, criterion)
    log.info("selected %s by %s (score %.4f)", results[idx].lambdas, criterion, score)
    return ExperimentReport(
        settings=results,
        selection={
            "criterion": criterion,
            "lambdas": list(results[idx].lambdas),
            "score": score,
            "index": idx,
        },
        config={"train": asdict(tcfg), "grid": asdict(grid), "seeds": k},
    )


def run_baselines(
    bundle: DatasetBundle,
    tcfg: TrainConfig | None = None,
    k: int = 10,
    l2_values: Sequence[float] = GRID_VALUES,
    selection: str = "ctf_validation",
    embeddings: EmbeddingTable | None = None,
    which: Iterable[str] = ("l2_bow", "l2_glove", "feature_selection", "data_augmentation"),
    n_jobs: int = 1,
) -> list[SettingResult]:
    """L2, L2 on mean embeddings, spurious-column removal and counterfactual augmentation.

    Every baseline uses a uniform penalty lambda_c = lambda_s = lambda_r,
    tuned over `l2_values` with `selection`. Baselines whose inputs are
    missing (no twins, no embeddings) are skipped with a logged warning.
    """
    tcfg = tcfg or TrainConfig()
    criterion = resolve_selection(bundle, selection)
    cfgs = [PenaltyConfig.uniform(v) for v in sorted(set(l2_values))]
    rows: list[SettingResult] = []

    def tuned(name, b, variant=None):
        results = _settings(b, cfgs, tcfg, k, n_jobs, variant)
        idx, _ = select_best(results, criterion)
        best = results[idx]
        best.name = name
        return best

    for name in which:
        if name == "l2_bow":
            rows.append(tuned(name, bundle))
        elif name == "feature_selection":
            if not bundle.groups.spurious:
                log.warning("feature_selection baseline skipped: no spurious features")
                continue
            rows.append(tuned(name, bundle.with_features_removed(bundle.groups.spurious)))
        elif name == "data_augmentation":
            if bundle.train.twin is None:
                log.warning("data_augmentation baseline skipped: training rows have no twins")
                continue
            rows.append(tuned(name, bundle, variant="augment"))
        elif name == "l2_glove":
            if embeddings is None or bundle.train.tokens is None:
                log.warning("l2_glove baseline skipped: no embedding table or token lists")
                continue
            rows.append(tuned(name, embed_bundle(bundle, embeddings, GroupWeights())))
        else:
            raise ConfigError(f"unknown baseline {name!r}")
    return rows


def lambda_sweep(
    bundle: DatasetBundle,
    tcfg: TrainConfig | None = None,
    values: Sequence[float] = GRID_VALUES,
    k: int = 3,
    n_jobs: int = 1,
) -> dict:
    """Vary one penalty at a time from (0, 0, 0) and record accuracies.

    Returns {'points': {axis: [{'value', metrics...}]}, 'max_ctf_change':
    {axis: max |ctf accuracy - ctf accuracy at the origin|}}.
    """
    tcfg = tcfg or TrainConfig()
    values = sorted(set(values) | {0.0})
    axes = ("lambda_c", "lambda_s", "lambda_r")
    cfgs = [PenaltyConfig()]
    for a in range(3):
        for v in values:
            if v == 0.0:
                continue
            triple = [0.0, 0.0, 0.0]
            triple[a] = v
            cfgs.append(PenaltyConfig(*triple))
    results = {r.lambdas: r for r in _settings(bundle, cfgs, tcfg, k, n_jobs)}
    origin = results[(0.0, 0.0, 0.0)]
    points: dict[str, list] = {}
    change: dict[str, float] = {}
    for a, axis in enumerate(axes):
        pts = []
        for v in values:
            triple = [0.0, 0.0, 0.0]
            triple[a] = v
            r = results[tuple(triple)]
            pts.append({"value": v, **{m: r.mean[m] for m in ("test_accuracy", "ctf_test_accuracy") if m in r.mean}})
        points[axis] = pts
        if "ctf_test_accuracy" in origin.mean:
            base = origin.mean["ctf_test_accuracy"]
            change[axis] = max(abs(p["ctf_test_accuracy"] - base) for p in pts)
    return {"points": points, "max_ctf_change": change, "seeds": seed_list(tcfg, k)}
