import csv
import io
import json

import pytest

from pipeline import CORPUS_DIR, run_pipeline
from mlcomp.cli import _settings, build_parser, main
from mlcomp.dataset import read_dataset
from mlcomp.features import FEATURE_NAMES
from mlcomp.interp import observables
from mlcomp.tir import parse_module


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    run_pipeline(out, seed=0, per_program=6, episodes=12, k_random=3,
                 pe_models="mean-std:knn,mean-std:ridge")
    return out


def test_no_subcommand_is_usage_error(capsys):
    assert main([]) == 1
    assert "subcommand" in capsys.readouterr().err


def test_unknown_flag_is_usage_error():
    assert main(["extract", "--bogus"]) == 1


def test_missing_required_setting():
    assert main(["extract"]) == 1


def test_runtime_errors_exit_2(tmp_path):
    assert main(["train-pe", "--dataset", str(tmp_path / "missing.jsonl"), "--out", "x"]) == 2
    bad = tmp_path / "bad.tir"
    bad.write_text("func @main( {")
    assert main(["features", str(bad)]) == 2
    assert main(["extract", "--platform", "nowhere", "--out", str(tmp_path / "d")]) == 2


def test_unknown_phase_is_usage_error():
    assert main(["optimize", "--program", str(CORPUS_DIR / "sum1to10.tir"),
                 "--phases", "constfold,warp"]) == 1


def test_features_manifest(capsys):
    assert main(["features", "--manifest"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["index", "name", "description"]
    assert [r[1] for r in rows[1:]] == list(FEATURE_NAMES)


def test_features_csv_and_json(capsys):
    path = str(CORPUS_DIR / "fib-iter.tir")
    assert main(["features", path]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 64
    assert main(["features", path, "--out", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert list(doc["features"]) == list(FEATURE_NAMES)
    assert [float(r[2]) for r in rows[1:]] == list(doc["features"].values())


def test_settings_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("seed = 5\nper-program = 7\nmax_len = 9\n")
    parser = build_parser()
    monkeypatch.setenv("MLCOMP_SEED", "3")
    args = parser.parse_args(["extract"])
    assert _settings(args, {"seed": 0})["seed"] == "3"
    args = parser.parse_args(["extract", "--config", str(cfg)])
    s = _settings(args, {"seed": 0, "max_len": 32})
    assert (s["seed"], s["per_program"], s["max_len"]) == ("5", "7", "9")
    args = parser.parse_args(["extract", "--config", str(cfg), "--seed", "11"])
    assert _settings(args, {"seed": 0})["seed"] == "11"


def test_env_seed_reaches_extract(tmp_path, monkeypatch):
    monkeypatch.setenv("MLCOMP_SEED", "42")
    assert main(["extract", "--per-program", "1", "--out", str(tmp_path / "d.jsonl")]) == 0
    assert read_dataset(tmp_path / "d.jsonl").seed == 42


def test_pipeline_outputs(small_run):
    opt = parse_module((small_run / "matmul4.tir").read_text())
    ref = parse_module((CORPUS_DIR / "matmul4.tir").read_text())
    assert observables(opt) == observables(ref)
    rep = json.loads((small_run / "matmul4.json").read_text())
    assert rep["program"] == "matmul4" and rep["changed_count"] == len(rep["applied_sequence"])
    doc = json.loads((small_run / "report.json").read_text())
    assert doc["summary"]["n_programs"] == 15
    assert len((small_run / "report.csv").read_text().splitlines()) == 1 + 15 * 5


def test_optimize_with_explicit_phases(tmp_path, capsys):
    src = CORPUS_DIR / "polyeval.tir"
    assert main(["optimize", "--program", str(src), "--phases", "constprop,constfold,dce",
                 "--report", str(tmp_path / "r.json")]) == 0
    out = parse_module(capsys.readouterr().out)
    assert observables(out) == observables(parse_module(src.read_text()))
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["terminal_reason"] == "explicit" and rep["attempt_count"] == 3


def test_train_pss_config_file(small_run, tmp_path):
    cfg = tmp_path / "pss.cfg"
    cfg.write_text("episodes = 6\nbatch = 3\nweights = 0.5, 0.5, 0\n")
    out = tmp_path / "p.json"
    assert main(["train-pss", "--config", str(cfg), "--pe", str(small_run / "pe.bundle"),
                 "--out", str(out)]) == 0
    meta = json.loads(out.read_text())["meta"]
    assert meta["updates"] == 2 and meta["config"]["weights"] == [0.5, 0.5, 0.0]
