"""Global dead-code elimination and CFG cleanup phases."""

from __future__ import annotations

from ..tir.analysis import compute_cfg, liveness
from ..tir.ir import PURE, Block, Function, Instr, Module


def _map_functions(m: Module, transform) -> Module:
    return m.with_functions(transform(fn) for fn in m.functions)


def _dce_function(fn: Function) -> Function:
    while True:
        _, live_out = liveness(fn)
        blocks = []
        removed = False
        for b in fn.blocks:
            live = set(live_out[b.label])
            kept = []
            for ins in reversed(b.instrs):
                if ins.kind in PURE and ins.dest not in live:
                    removed = True
                    continue
                if ins.dest is not None:
                    live.discard(ins.dest)
                live.update(ins.uses())
                kept.append(ins)
            kept.reverse()
            blocks.append(Block(b.label, tuple(kept)))
        if not removed:
            return fn
        fn = fn.with_blocks(blocks)


def dce(m: Module) -> Module:
    return _map_functions(m, _dce_function)


def _retarget(ins: Instr, mapping) -> Instr:
    return Instr(ins.kind, ins.dest, ins.args, tuple(mapping(t) for t in ins.targets), ins.callee)


def _fold_branches(fn: Function) -> Function:
    blocks = []
    for b in fn.blocks:
        t = b.terminator
        if t.kind == "br":
            cond = t.args[0]
            if isinstance(cond, int):
                t = Instr("jmp", targets=(t.targets[0] if cond != 0 else t.targets[1],))
            elif t.targets[0] == t.targets[1]:
                t = Instr("jmp", targets=(t.targets[0],))
        blocks.append(b if t is b.terminator else Block(b.label, b.body + (t,)))
    return fn.with_blocks(blocks)


def _drop_unreachable(fn: Function) -> Function:
    cfg = compute_cfg(fn)
    if len(cfg.reachable) == len(fn.blocks):
        return fn
    return fn.with_blocks(b for b in fn.blocks if b.label in cfg.reachable)


def _merge_one(fn: Function) -> Function | None:
    cfg = compute_cfg(fn)
    entry = fn.blocks[0].label
    for p in fn.blocks:
        t = p.terminator
        if t.kind != "jmp":
            continue
        target = t.targets[0]
        if target == entry or target == p.label or cfg.preds[target] != (p.label,):
            continue
        succ = fn.block_map[target]
        merged = Block(p.label, p.body + succ.instrs)
        return fn.with_blocks(merged if b.label == p.label else b
                              for b in fn.blocks if b.label != target)
    return None


def _simplifycfg_function(fn: Function) -> Function:
    fn = _drop_unreachable(_fold_branches(fn))
    while True:
        merged = _merge_one(fn)
        if merged is None:
            return fn
        fn = merged


def simplifycfg(m: Module) -> Module:
    return _map_functions(m, _simplifycfg_function)


def _jumpthread_function(fn: Function) -> Function:
    forward = {b.label: b.terminator.targets[0] for b in fn.blocks
               if len(b.instrs) == 1 and b.terminator.kind == "jmp"}
    if not forward:
        return fn

    def resolve(label: str) -> str:
        seen = [label]
        while label in forward:
            label = forward[label]
            if label in seen:
                # a cycle of empty jumps: leave the edge alone
                return seen[0]
            seen.append(label)
        return label

    blocks = []
    for b in fn.blocks:
        t = b.terminator
        new = _retarget(t, resolve)
        blocks.append(b if new == t else Block(b.label, b.body + (new,)))
    return fn.with_blocks(blocks)


def jumpthread(m: Module) -> Module:
    return _map_functions(m, _jumpthread_function)
