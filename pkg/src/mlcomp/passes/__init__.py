"""Optimization phase registry.

The registry order is part of the policy file format: a trained policy
stores phase indices, so never reorder or remove entries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

from ..tir.ir import Module
from ..tir.printer import print_module
from ..tir.verify import verify_module
from .cleanup import dce, jumpthread, simplifycfg
from .inline import inline
from .local import constfold, constprop, copyprop, cse, deadstore, strengthred
from .loops import licm, loopunroll


@dataclass(frozen=True)
class PhaseId:
    name: str
    index: int

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class PhaseResult:
    module: Module
    changed: bool


_TRANSFORMS: tuple[tuple[str, Callable[[Module], Module]], ...] = (
    ("constfold", constfold),
    ("constprop", constprop),
    ("copyprop", copyprop),
    ("dce", dce),
    ("cse", cse),
    ("simplifycfg", simplifycfg),
    ("jumpthread", jumpthread),
    ("licm", licm),
    ("loopunroll", loopunroll),
    ("strengthred", strengthred),
    ("inline", inline),
    ("deadstore", deadstore),
)

PHASES: tuple[PhaseId, ...] = tuple(PhaseId(name, i) for i, (name, _) in enumerate(_TRANSFORMS))
PHASE_NAMES: tuple[str, ...] = tuple(p.name for p in PHASES)
_BY_NAME = {p.name: p for p in PHASES}


class UnknownPhaseError(KeyError):
    def __str__(self) -> str:
        return f"unknown phase {self.args[0]!r}; known phases: {', '.join(PHASE_NAMES)}"


def list_phases() -> list[PhaseId]:
    return list(PHASES)


def resolve_phase(p: PhaseId | str | int) -> PhaseId:
    if isinstance(p, PhaseId):
        if _BY_NAME.get(p.name) != p:
            raise UnknownPhaseError(p.name)
        return p
    if isinstance(p, int) and not isinstance(p, bool):
        if not 0 <= p < len(PHASES):
            raise UnknownPhaseError(p)
        return PHASES[p]
    if p not in _BY_NAME:
        raise UnknownPhaseError(p)
    return _BY_NAME[p]


def parse_phase_list(text: str) -> list[PhaseId]:
    """Comma-separated phase names, e.g. ``constprop,constfold,dce``."""
    return [resolve_phase(name.strip()) for name in text.split(",") if name.strip()]


def apply_phase(m: Module, p: PhaseId | str | int, *, verify: bool = False) -> PhaseResult:
    phase = resolve_phase(p)
    out = _TRANSFORMS[phase.index][1](m)
    if verify:
        verify_module(out)
    changed = out is not m and print_module(out) != print_module(m)
    return PhaseResult(out if changed else m, changed)


def run_sequence(m: Module, seq: Iterable[PhaseId | str | int], *,
                 verify: bool = False) -> tuple[Module, list[bool]]:
    flags = []
    for p in seq:
        result = apply_phase(m, p, verify=verify)
        m = result.module
        flags.append(result.changed)
    return m, flags


__all__ = [
    "PhaseId", "PhaseResult", "PHASES", "PHASE_NAMES", "UnknownPhaseError", "list_phases",
    "resolve_phase", "parse_phase_list", "apply_phase", "run_sequence",
]
