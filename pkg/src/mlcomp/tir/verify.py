"""Structural verifier for TIR modules."""

from __future__ import annotations

from .analysis import defined_in
from .ir import BINARY, Function, Global, Module, TirVerifyError

_ARITY = {"const": 1, "copy": 1, "load": 2, "store": 3, "ret": 1, "br": 1, "jmp": 0, "print": 1}
_ARITY.update({k: 2 for k in BINARY})
_NO_DEST = {"store", "ret", "br", "jmp", "print"}


def verify_module(m: Module) -> None:
    """Raise :class:`TirVerifyError` if ``m`` breaks a structural invariant."""
    names = [f.name for f in m.functions]
    if len(set(names)) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise TirVerifyError(f"duplicate function @{dup}")
    gnames = [g for g, _ in m.globals]
    if len(set(gnames)) != len(gnames):
        dup = next(n for n in gnames if gnames.count(n) > 1)
        raise TirVerifyError(f"duplicate global @{dup}")
    for g, length in m.globals:
        if length <= 0:
            raise TirVerifyError(f"global @{g} has non-positive length")
    if m.entry not in m.function_map:
        raise TirVerifyError(f"entry function @{m.entry} not defined")
    if m.function(m.entry).params:
        raise TirVerifyError(f"entry function @{m.entry} must take no parameters")
    for fn in m.functions:
        _verify_function(m, fn)


def _verify_function(m: Module, fn: Function) -> None:
    where = f"@{fn.name}"
    if not fn.blocks:
        raise TirVerifyError("function has no blocks", where=where)
    if len(set(fn.params)) != len(fn.params):
        raise TirVerifyError("duplicate parameter", where=where)
    labels = [b.label for b in fn.blocks]
    if len(set(labels)) != len(labels):
        dup = next(n for n in labels if labels.count(n) > 1)
        raise TirVerifyError(f"duplicate label {dup}", where=where)
    label_set = set(labels)
    for b in fn.blocks:
        bwhere = f"{where}:{b.label}"
        if not b.instrs:
            raise TirVerifyError("empty block", where=bwhere)
        for idx, ins in enumerate(b.instrs):
            iwhere = f"{bwhere}[{idx}]"
            last = idx == len(b.instrs) - 1
            if ins.is_terminator != last:
                msg = "terminator in the middle of a block" if ins.is_terminator else "block does not end in a terminator"
                raise TirVerifyError(msg, where=iwhere)
            _check_instr(m, ins, iwhere, label_set)
    d_in = defined_in(fn)
    for b in fn.blocks:
        if b.label not in d_in:
            continue
        defined = set(d_in[b.label])
        for idx, ins in enumerate(b.instrs):
            for r in ins.uses():
                if r not in defined:
                    raise TirVerifyError(
                        f"register %{r} may be used before definition",
                        where=f"{where}:{b.label}[{idx}]",
                    )
            if ins.dest is not None:
                defined.add(ins.dest)


def _check_instr(m: Module, ins, where: str, labels: set[str]) -> None:
    k = ins.kind
    if k == "call":
        if ins.dest is None:
            raise TirVerifyError("call needs a destination", where=where)
        if ins.callee not in m.function_map:
            raise TirVerifyError(f"call to undefined function @{ins.callee}", where=where)
        want = len(m.function(ins.callee).params)
        if len(ins.args) != want:
            raise TirVerifyError(
                f"call to @{ins.callee} with {len(ins.args)} arguments, expected {want}", where=where
            )
        if any(isinstance(a, Global) for a in ins.args):
            raise TirVerifyError("global used as a value", where=where)
        return
    if k not in _ARITY:
        raise TirVerifyError(f"unknown instruction kind {k!r}", where=where)
    if len(ins.args) != _ARITY[k]:
        raise TirVerifyError(f"bad arity for {k}: {len(ins.args)} operands", where=where)
    if (ins.dest is None) != (k in _NO_DEST):
        raise TirVerifyError(f"bad destination for {k}", where=where)
    want_targets = {"br": 2, "jmp": 1}.get(k, 0)
    if len(ins.targets) != want_targets:
        raise TirVerifyError(f"bad target count for {k}", where=where)
    for t in ins.targets:
        if t not in labels:
            raise TirVerifyError(f"undefined block target {t}", where=where)
    for pos, a in enumerate(ins.args):
        global_slot = (k == "load" and pos == 0) or (k == "store" and pos == 1)
        if isinstance(a, Global) != global_slot:
            raise TirVerifyError(
                f"operand {pos} of {k} must {'' if global_slot else 'not '}be a global", where=where
            )
        if global_slot and a.name not in m.global_map:
            raise TirVerifyError(f"undefined global @{a.name}", where=where)
