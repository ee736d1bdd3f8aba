import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from causalreg.cli import annotation_rows, main
from causalreg.core import PenaltyConfig
from causalreg.data import build_text_bundle, load_text_corpus
from causalreg.experiments import evaluate, fit
from causalreg.io import load_model
from causalreg.optim import TrainConfig

SMALL_GRID = {"lambda_c": [0.0], "lambda_s": [1.0, 100.0], "lambda_r": [0.0, 10.0]}


def write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    cfg = write_json(root / "synth.json", {"dataset": {"synthetic": {"n": 600}}, "output": "data"})
    assert main(["synth", "--config", str(cfg)]) == 0
    return root / "data"


def run_config(synth_dir: Path, tmp_path: Path, **extra) -> Path:
    data = json.loads((synth_dir / "config.json").read_text())
    for key in ("path", "groups", "embeddings"):
        data["dataset"][key] = str(synth_dir / data["dataset"][key])
    data.update(grid=SMALL_GRID, baseline_values=[0.0, 1.0], train={"learning_rate": 0.05},
                output=str(tmp_path / "out"))
    data.update(extra)
    return write_json(tmp_path / "run.json", data)


def test_synth_files_are_self_contained(synth_dir):
    assert {p.name for p in synth_dir.iterdir()} == {"corpus.tsv", "groups.json", "glove.txt", "config.json"}
    data = json.loads((synth_dir / "config.json").read_text())
    assert data["dataset"]["path"] == "corpus.tsv"


def test_grid_runs_from_generated_config(synth_dir, tmp_path):
    data = json.loads((synth_dir / "config.json").read_text())
    data.update(grid=SMALL_GRID, baseline_values=[0.0, 1.0], train={"learning_rate": 0.05})
    cfg = write_json(synth_dir / "small.json", data)
    assert main(["grid", "--config", str(cfg), "--output", str(tmp_path / "g")]) == 0
    report = json.loads((tmp_path / "g" / "report.json").read_text())
    assert {"settings", "per_seed_metrics", "aggregate", "baselines", "selection"} <= set(report)
    assert [b["name"] for b in report["baselines"]] == [
        "l2_bow", "l2_glove", "feature_selection", "data_augmentation"
    ]
    assert (tmp_path / "g" / "report.txt").read_text().startswith("model")
    assert load_model(tmp_path / "g" / "model.json").penalty.as_tuple() == tuple(report["selection"]["lambdas"])


def test_grid_is_byte_identical(synth_dir, tmp_path):
    cfg = run_config(synth_dir, tmp_path, baselines=["l2_bow"])
    assert main(["grid", "--config", str(cfg), "--jobs", "1"]) == 0
    first = (tmp_path / "out" / "report.json").read_bytes()
    assert main(["grid", "--config", str(cfg), "--jobs", "1"]) == 0
    assert (tmp_path / "out" / "report.json").read_bytes() == first


def test_train_then_eval_matches_in_process(synth_dir, tmp_path):
    cfg = run_config(synth_dir, tmp_path)
    assert main(["train", "--config", str(cfg), "--lambda-c", "0", "--lambda-s", "0", "--lambda-r", "0"]) == 0
    model_path = tmp_path / "out" / "model.json"
    assert main(["eval", "--config", str(cfg), "--model", str(model_path), "--output", str(tmp_path / "ev")]) == 0
    cli = json.loads((tmp_path / "ev" / "report.json").read_text())["aggregate"]["mean"]

    groups = json.loads((synth_dir / "groups.json").read_text())
    bundle = build_text_bundle(load_text_corpus(synth_dir / "corpus.tsv"), groups)
    model = fit(bundle, PenaltyConfig(), TrainConfig(learning_rate=0.05)).model
    direct = evaluate(model, bundle)
    assert set(direct) <= set(cli)
    for key, v in direct.items():
        assert cli[key] == v


def test_model_round_trip_is_bit_exact(synth_dir, tmp_path):
    cfg = run_config(synth_dir, tmp_path)
    assert main(["train", "--config", str(cfg), "--lambda-s", "10"]) == 0
    saved = load_model(tmp_path / "out" / "model.json")
    groups = json.loads((synth_dir / "groups.json").read_text())
    bundle = build_text_bundle(load_text_corpus(synth_dir / "corpus.tsv"), groups)
    model = fit(bundle, PenaltyConfig(0, 10, 0), TrainConfig(learning_rate=0.05)).model
    np.testing.assert_array_equal(saved.model.predict_proba(bundle.test.X), model.predict_proba(bundle.test.X))


def test_glove_weighted_train_and_eval(synth_dir, tmp_path):
    cfg = run_config(synth_dir, tmp_path, representation="glove_weighted", embedding_weights=[2.0, 0.5, 1.0])
    assert main(["train", "--config", str(cfg)]) == 0
    first = json.loads((tmp_path / "out" / "report.json").read_text())["aggregate"]["mean"]
    assert main(["eval", "--config", str(cfg), "--model", str(tmp_path / "out" / "model.json"),
                 "--output", str(tmp_path / "ev")]) == 0
    again = json.loads((tmp_path / "ev" / "report.json").read_text())["aggregate"]["mean"]
    assert again["test_accuracy"] == first["test_accuracy"]


def test_sweep_command(synth_dir, tmp_path):
    cfg = run_config(synth_dir, tmp_path, sweep_values=[0.0, 100.0], sweep_seeds=1)
    assert main(["sweep", "--config", str(cfg)]) == 0
    sweep = json.loads((tmp_path / "out" / "report.json").read_text())["sweep"]
    assert set(sweep["max_ctf_change"]) == {"lambda_c", "lambda_s", "lambda_r"}


def test_admission_synth_and_train(tmp_path):
    cfg = write_json(tmp_path / "s.json", {"dataset": {"synthetic": {"n": 2000}}, "output": "adm"})
    assert main(["synth", "--config", str(cfg), "--kind", "admission"]) == 0
    run = tmp_path / "adm" / "config.json"
    assert main(["train", "--config", str(run), "--lambda-s", "1", "--output", str(tmp_path / "t")]) == 0
    mean = json.loads((tmp_path / "t" / "report.json").read_text())["aggregate"]["mean"]
    assert {"test_delta_eo", "test_delta_dp"} <= set(mean)


# annotation -------------------------------------------------------------------


def test_annotation_rows_sorting():
    w = np.array([0.5, -2.0, 2.0, 1.5, -0.2])
    rows = annotation_rows(w, list("abcde"), 1.0)
    assert rows == [("b", -2.0), ("c", 2.0), ("d", 1.5)]
    assert annotation_rows(w, list("abcde"), float("inf")) == []


def test_annotate_export(synth_dir, tmp_path):
    cfg = run_config(synth_dir, tmp_path, annotate_threshold=0.5)
    assert main(["annotate-export", "--config", str(cfg)]) == 0
    lines = (tmp_path / "out" / "annotation.tsv").read_text().splitlines()
    assert lines[0] == "feature\tweight"
    weights = [abs(float(line.split("\t")[1])) for line in lines[1:]]
    assert weights and all(w > 0.5 for w in weights)
    assert weights == sorted(weights, reverse=True)
    assert json.loads((tmp_path / "out" / "annotation.json").read_text())["threshold"] == 0.5


def test_annotate_export_infinite_threshold(synth_dir, tmp_path):
    cfg = run_config(synth_dir, tmp_path)
    data = json.loads(cfg.read_text())
    data["annotate_threshold"] = 1e308 * 10  # json writes Infinity
    write_json(cfg, data)
    assert main(["annotate-export", "--config", str(cfg)]) == 0
    assert (tmp_path / "out" / "annotation.tsv").read_text() == "feature\tweight\n"


# errors and exit codes ---------------------------------------------------------


@pytest.mark.parametrize(
    "patch",
    [
        {"representation": "tabular"},
        {"selection": "best"},
        {"seeds": 0},
        {"unknown_key": 1},
        {"grid": {"lambda_c": [-1]}},
        {"train": {"learning_rate": -1}},
        {"dataset": {"format": "text", "path": "missing.tsv"}},
    ],
)
def test_config_errors_exit_2_without_output(synth_dir, tmp_path, patch, capsys):
    cfg = run_config(synth_dir, tmp_path, **patch)
    assert main(["train", "--config", str(cfg)]) == 2
    assert not (tmp_path / "out").exists()
    assert "causalreg: error:" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["train", "--config", str(tmp_path / "nope.json")]) == 2


def test_eval_needs_model(synth_dir, tmp_path):
    assert main(["eval", "--config", str(run_config(synth_dir, tmp_path))]) == 2


def test_data_error_exit_3(tmp_path):
    (tmp_path / "bad.tsv").write_text("oops\n")
    cfg = write_json(tmp_path / "c.json", {"dataset": {"format": "text", "path": "bad.tsv"}, "output": "o"})
    assert main(["train", "--config", str(cfg)]) == 3
    assert not (tmp_path / "o").exists()


def test_numerical_error_exit_4(synth_dir, tmp_path):
    cfg = run_config(synth_dir, tmp_path, representation="glove_weighted", embedding_weights=[1e308] * 3)
    assert main(["train", "--config", str(cfg)]) == 4
    assert not (tmp_path / "out").exists()


def test_refuses_foreign_output_dir(synth_dir, tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    (out / "precious.txt").write_text("keep")
    assert main(["train", "--config", str(run_config(synth_dir, tmp_path))]) == 2
    assert (out / "precious.txt").read_text() == "keep"


def test_console_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "causalreg.cli", "--help"], capture_output=True, text=True, check=True
    )
    for name in ("annotate-export", "train", "eval", "grid", "sweep", "synth"):
        assert name in res.stdout
