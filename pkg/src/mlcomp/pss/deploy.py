"""Steer the optimizer with a trained policy, one phase at a time."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..features import extract_features
from ..passes import apply_phase
from ..tir.ir import Module
from ..tir.verify import verify_module
from .policy import PhasePolicy


@dataclass
class OptimizeReport:
    applied: list[str] = field(default_factory=list)  # phases that changed the program
    attempts: list[dict] = field(default_factory=list)
    terminal_reason: str = ""

    def to_dict(self) -> dict:
        return {"applied_sequence": self.applied, "changed_count": len(self.applied),
                "attempt_count": len(self.attempts), "terminal_reason": self.terminal_reason,
                "attempts": self.attempts}


def rank_phases(probs: np.ndarray) -> list[int]:
    """Descending probability; equal probabilities keep registry order."""
    return sorted(range(len(probs)), key=lambda i: (-probs[i], i))


def optimize_program(m: Module, policy: PhasePolicy, max_sequence_len: int = 128,
                     max_inactive_len: int = 8) -> tuple[Module, list[str], OptimizeReport]:
    """Apply the most probable phase; when it leaves the program unchanged
    fall back to the next best, until one of the caps is reached."""
    report = OptimizeReport()
    inactive = 0
    while True:
        if len(report.applied) >= max_sequence_len:
            report.terminal_reason = "length"
            break
        if inactive >= max_inactive_len:
            report.terminal_reason = "inactive"
            break
        ranking = rank_phases(policy.forward(extract_features(m).values))
        for rank, idx in enumerate(ranking):
            name = policy.phases[idx]
            res = apply_phase(m, name)
            report.attempts.append({"phase": name, "rank": rank, "changed": res.changed})
            if res.changed:
                verify_module(res.module)
                m = res.module
                report.applied.append(name)
                inactive = 0
                break
            inactive += 1
            if inactive >= max_inactive_len:
                break
        else:
            # every phase tried without effect: a fixed point of the whole registry
            report.terminal_reason = "fixed-point"
            break
    return m, list(report.applied), report
