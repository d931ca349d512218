"""Ground-truth evaluation of a policy against baseline pipelines."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .costmodel import METRICS, DynamicFeatures, PlatformModel, profile
from .dataset import random_phase_sequence
from .interp import DEFAULT_FUEL, TrapError
from .passes import PhaseId, resolve_phase, run_sequence
from .pss.deploy import optimize_program
from .pss.policy import PhasePolicy

VARIANTS = ("unoptimized", "fixed-O", "random-best", "random-median", "policy")
CSV_COLUMNS = ("program", "variant") + METRICS + ("rel_time", "rel_energy", "rel_size")
RELATIVE = {"rel_time": "exec_time_s", "rel_energy": "energy_j", "rel_size": "code_size_bytes"}

_FIXED = ("inline", "simplifycfg", "constprop", "constfold", "copyprop", "cse", "strengthred",
          "licm", "loopunroll", "jumpthread", "simplifycfg", "deadstore", "dce")


def canonical_fixed_sequence() -> list[PhaseId]:
    """Hand-ordered pipeline: inline first, loop work in the middle, cleanup last."""
    return [resolve_phase(p) for p in _FIXED]


@dataclass
class EvalRow:
    program_id: str
    variant: str
    dynamics: DynamicFeatures | None
    relatives: dict[str, float] = field(default_factory=dict)
    sequence: list[str] | None = None
    error: str | None = None

    def csv_record(self) -> dict:
        rec = {"program": self.program_id, "variant": self.variant}
        dyn = self.dynamics.as_dict() if self.dynamics else {}
        for m in METRICS:
            rec[m] = repr(dyn[m]) if m in dyn else ""
        for k in RELATIVE:
            rec[k] = repr(self.relatives[k]) if k in self.relatives else ""
        return rec

    def to_dict(self) -> dict:
        return {"program": self.program_id, "variant": self.variant,
                "dynamics": self.dynamics.as_dict() if self.dynamics else None,
                "relatives": dict(self.relatives), "sequence": self.sequence, "error": self.error}


def relatives(dyn: DynamicFeatures, base: DynamicFeatures) -> dict[str, float]:
    out = {}
    for key, metric in RELATIVE.items():
        b = getattr(base, metric)
        out[key] = getattr(dyn, metric) / b if b else math.nan
    return out


def _pool_row(pool: list[DynamicFeatures], pick) -> DynamicFeatures:
    """Per-metric selection over a pool of profiled random sequences."""
    vals = {m: pick(sorted(getattr(d, m) for d in pool)) for m in METRICS}
    return DynamicFeatures(**vals)


def _lower_median(xs):
    return xs[(len(xs) - 1) // 2]


def evaluate_program(pid: str, m, policy: PhasePolicy, platform: PlatformModel, pi: int,
                     k_random: int = 30, seed: int = 0, fuel: int = DEFAULT_FUEL,
                     random_max_len: int = 32, max_sequence_len: int = 128,
                     max_inactive_len: int = 8) -> list[EvalRow]:
    try:
        base = profile(m, platform, fuel)
    except TrapError as exc:
        return [EvalRow(pid, v, None, error=f"{type(exc).__name__}: {exc}") for v in VARIANTS]
    rows = [EvalRow(pid, "unoptimized", base, relatives(base, base), [])]

    def measured(variant, seq):
        try:
            out, _ = run_sequence(m, seq)
            dyn = profile(out, platform, fuel)
        except TrapError as exc:
            return EvalRow(pid, variant, None, sequence=[str(s) for s in seq],
                           error=f"{type(exc).__name__}: {exc}")
        return EvalRow(pid, variant, dyn, relatives(dyn, base), [str(s) for s in seq])

    rows.append(measured("fixed-O", canonical_fixed_sequence()))

    pool = []
    for k in range(k_random):
        seq = random_phase_sequence([seed, 2, pi, k], random_max_len)
        try:
            pool.append(profile(run_sequence(m, seq)[0], platform, fuel))
        except TrapError:
            continue
    for variant, pick in (("random-best", lambda xs: xs[0]), ("random-median", _lower_median)):
        if pool:
            dyn = _pool_row(pool, pick)
            rows.append(EvalRow(pid, variant, dyn, relatives(dyn, base)))
        else:
            rows.append(EvalRow(pid, variant, None, error="every random sequence trapped"))

    _, applied, _ = optimize_program(m, policy, max_sequence_len, max_inactive_len)
    rows.append(measured("policy", applied))
    return rows


def geometric_mean(xs) -> float:
    xs = np.asarray(list(xs), dtype=float)
    if len(xs) == 0:
        return math.nan
    return float(np.exp(np.mean(np.log(xs))))


def summarize(rows: list[EvalRow]) -> dict:
    summary: dict = {"geomean": {}, "n_programs": len({r.program_id for r in rows})}
    for v in VARIANTS:
        ok = [r for r in rows if r.variant == v and r.error is None]
        summary["geomean"][v] = {k: geometric_mean(r.relatives[k] for r in ok) for k in RELATIVE}
    policy_rows = [r for r in rows if r.variant == "policy" and r.error is None]
    summary["policy_no_degradation"] = sum(
        all(r.relatives[k] <= 1.0 for k in RELATIVE) for r in policy_rows)
    summary["policy_programs"] = len(policy_rows)
    summary["errors"] = sum(r.error is not None for r in rows)
    return summary


def evaluate_policy(corpus, policy: PhasePolicy, platform: PlatformModel, k_random: int = 30,
                    seed: int = 0, fuel: int = DEFAULT_FUEL, max_sequence_len: int = 128,
                    max_inactive_len: int = 8) -> tuple[list[EvalRow], dict]:
    """Profile every variant of every program; all numbers come from the interpreter."""
    rows: list[EvalRow] = []
    for pi, (pid, m) in enumerate(corpus):
        rows.extend(evaluate_program(pid, m, policy, platform, pi, k_random, seed, fuel,
                                     max_sequence_len=max_sequence_len,
                                     max_inactive_len=max_inactive_len))
    return rows, summarize(rows)


def emit_report(rows: list[EvalRow], path_csv=None, path_json=None, summary: dict | None = None,
                meta: dict | None = None) -> dict:
    if not rows:
        raise ValueError("no rows to report")
    summary = summary if summary is not None else summarize(rows)
    if path_csv is not None:
        with open(path_csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow(r.csv_record())
    doc = {"rows": [r.to_dict() for r in rows], "summary": summary, "meta": meta or {}}
    if path_json is not None:
        with open(path_json, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
    return doc


def read_report_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
