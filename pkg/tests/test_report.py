import json
import math

import numpy as np
import pytest

from mlcomp.costmodel import METRICS
from mlcomp.interp import observables
from mlcomp.passes import run_sequence
from mlcomp.report import (
    CSV_COLUMNS, RELATIVE, VARIANTS, canonical_fixed_sequence, emit_report, evaluate_policy,
    geometric_mean, read_report_csv, summarize,
)

GOLDEN = ["inline", "simplifycfg", "constprop", "constfold", "copyprop", "cse", "strengthred",
          "licm", "loopunroll", "jumpthread", "simplifycfg", "deadstore", "dce"]


@pytest.fixture(scope="module")
def evaluated(corpus, trained_policy, ember):
    two = [p for p in corpus if p[0] in ("matmul4", "sum1to10")]
    return evaluate_policy(two, trained_policy, ember, k_random=8, seed=0)


def test_fixed_sequence_golden():
    seq = [str(p) for p in canonical_fixed_sequence()]
    assert seq == GOLDEN and len(seq) == 13 and seq[0] == "inline"
    assert seq.index("dce") > seq.index("loopunroll")


def test_fixed_sequence_preserves_semantics(corpus):
    for _, m in corpus:
        out, _ = run_sequence(m, canonical_fixed_sequence())
        assert observables(out) == observables(m)


def test_rows_and_relatives(evaluated):
    rows, summary = evaluated
    assert [(r.program_id, r.variant) for r in rows] == [
        (p, v) for p in ("matmul4", "sum1to10") for v in VARIANTS]
    by = {(r.program_id, r.variant): r for r in rows}
    for r in rows:
        assert r.error is None
        base = by[(r.program_id, "unoptimized")].dynamics
        for key, metric in RELATIVE.items():
            assert r.relatives[key] * getattr(base, metric) == pytest.approx(
                getattr(r.dynamics, metric), rel=1e-12)
        if r.variant == "unoptimized":
            assert all(v == 1.0 for v in r.relatives.values())
    for p in ("matmul4", "sum1to10"):
        best, med = by[(p, "random-best")].dynamics, by[(p, "random-median")].dynamics
        for m in METRICS:
            assert getattr(best, m) <= getattr(med, m)
    assert summary["n_programs"] == 2 and summary["policy_programs"] == 2


def test_policy_row_is_ground_truth(evaluated, programs, ember):
    from mlcomp.costmodel import profile

    rows, _ = evaluated
    r = next(r for r in rows if r.variant == "policy" and r.program_id == "matmul4")
    out, _ = run_sequence(programs["matmul4"], r.sequence)
    assert profile(out, ember) == r.dynamics


def test_csv_and_json(evaluated, tmp_path):
    rows, summary = evaluated
    csv_path, json_path = tmp_path / "r.csv", tmp_path / "r.json"
    emit_report(rows, csv_path, json_path, summary)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS) and len(lines) == 11
    back = read_report_csv(csv_path)
    for rec, r in zip(back, rows):
        assert (rec["program"], rec["variant"]) == (r.program_id, r.variant)
        for k in RELATIVE:
            assert float(rec[k]) == r.relatives[k]
        for m in METRICS:
            assert float(rec[m]) == getattr(r.dynamics, m)
    doc = json.loads(json_path.read_text())
    for v in VARIANTS:
        for k in RELATIVE:
            vals = [rec["relatives"][k] for rec in doc["rows"] if rec["variant"] == v]
            want = math.exp(sum(math.log(x) for x in vals) / len(vals))
            assert doc["summary"]["geomean"][v][k] == pytest.approx(want, rel=1e-12)


def test_empty_report_rejected():
    with pytest.raises(ValueError):
        emit_report([], None, None)


def test_geometric_mean():
    assert geometric_mean([2.0, 8.0]) == pytest.approx(4.0)
    assert math.isnan(geometric_mean([]))


def test_trap_marks_rows(trained_policy, ember):
    from helpers import module

    looping = module("func @main() {\nb:\n  jmp b\n}")
    rows, summary = evaluate_policy([("spin", looping)], trained_policy, ember, k_random=2, fuel=100)
    assert len(rows) == len(VARIANTS)
    assert all(r.error and "fuel" in r.error.lower() for r in rows)
    assert summary["errors"] == len(VARIANTS)


def test_no_degradation_count():
    from mlcomp.report import EvalRow

    def row(p, rel):
        return EvalRow(p, "policy", None, dict(zip(RELATIVE, rel)))

    s = summarize([row("a", (0.9, 1.0, 0.5)), row("b", (0.9, 1.0001, 0.5))])
    assert s["policy_no_degradation"] == 1 and s["policy_programs"] == 2
    assert np.isclose(s["geomean"]["policy"]["rel_time"], 0.9)
