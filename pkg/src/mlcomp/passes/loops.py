"""Loop phases: invariant code motion and full unrolling of small counted loops."""

from __future__ import annotations

from collections import Counter

from ..tir.analysis import (
    compute_cfg, compute_dominators, compute_loops, liveness, match_counted_loop,
)
from ..tir.ir import PURE, Block, Function, Instr, Module


def _fresh_label(fn: Function, base: str) -> str:
    taken = set(fn.block_map)
    label, n = base, 1
    while label in taken:
        label = f"{base}{n}"
        n += 1
    return label


def _hoistable(fn: Function, loop, cfg, dom, live_in) -> list[tuple[str, int]]:
    blocks = [label for label in cfg.order if label in loop.body]
    defs = Counter(ins.dest for label in blocks for ins in fn.block_map[label].instrs
                   if ins.dest is not None)
    exits = [(u, v) for u, v in cfg.edges if u in loop.body and v not in loop.body]
    hoisted: dict[tuple[str, int], str] = {}
    hoisted_regs: set[str] = set()
    progress = True
    while progress:
        progress = False
        for label in blocks:
            for idx, ins in enumerate(fn.block_map[label].instrs):
                if (label, idx) in hoisted or ins.kind not in PURE:
                    continue
                d = ins.dest
                if defs[d] != 1 or d in live_in[loop.header]:
                    continue
                if any(defs[r] and r not in hoisted_regs for r in ins.uses()):
                    continue
                if not all(label in dom[u] or d not in live_in[v] for u, v in exits):
                    continue
                hoisted[(label, idx)] = d
                hoisted_regs.add(d)
                progress = True
    return list(hoisted)


def _hoist(fn: Function, loop, cfg, dom, live_in) -> Function | None:
    picks = _hoistable(fn, loop, cfg, dom, live_in)
    if not picks:
        return None
    picked = set(picks)
    moved = [fn.block_map[label].instrs[idx] for label, idx in picks]
    blocks = []
    for b in fn.blocks:
        if b.label in loop.body:
            kept = tuple(ins for i, ins in enumerate(b.instrs) if (b.label, i) not in picked)
            b = Block(b.label, kept)
        blocks.append(b)
    if loop.preheader is not None:
        return fn.with_blocks(
            Block(b.label, b.body + tuple(moved) + (b.terminator,)) if b.label == loop.preheader else b
            for b in blocks
        )
    ph = _fresh_label(fn, f"{loop.header}.ph")
    outside = {p for p in cfg.preds[loop.header] if p not in loop.body}
    new_blocks = []
    for b in blocks:
        if b.label == loop.header:
            new_blocks.append(Block(ph, tuple(moved) + (Instr("jmp", targets=(loop.header,)),)))
        if b.label in outside:
            t = b.terminator
            t = Instr(t.kind, t.dest, t.args,
                      tuple(ph if x == loop.header else x for x in t.targets), t.callee)
            b = Block(b.label, b.body + (t,))
        new_blocks.append(b)
    return fn.with_blocks(new_blocks)


def _licm_function(fn: Function) -> Function:
    while True:
        cfg = compute_cfg(fn)
        info = compute_loops(fn, cfg)
        if not info.loops:
            return fn
        dom = compute_dominators(fn, cfg)
        live_in, _ = liveness(fn, cfg)
        order = {label: i for i, label in enumerate(cfg.order)}
        for loop in sorted(info.loops, key=lambda lp: (-lp.depth, order[lp.header])):
            new = _hoist(fn, loop, cfg, dom, live_in)
            if new is not None:
                fn = new
                break
        else:
            return fn


def licm(m: Module) -> Module:
    return m.with_functions(_licm_function(fn) for fn in m.functions)


MAX_UNROLL_TRIPS = 8


def _unroll_one(fn: Function) -> Function | None:
    cfg = compute_cfg(fn)
    info = compute_loops(fn, cfg)
    for loop in info.innermost():
        cl = match_counted_loop(fn, loop, cfg)
        if cl is None or cl.trip_count > MAX_UNROLL_TRIPS:
            continue
        header = fn.block_map[cl.header]
        body = fn.block_map[cl.body]
        instrs = []
        for _ in range(cl.trip_count):
            instrs.extend(header.body)
            instrs.extend(body.body)
        instrs.extend(header.body)
        instrs.append(Instr("jmp", targets=(cl.exit,)))
        label = _fresh_label(fn, f"{cl.header}.unrolled")
        blocks = []
        for b in fn.blocks:
            if b.label == cl.header:
                blocks.append(Block(label, tuple(instrs)))
                continue
            if b.label == cl.body:
                continue
            if b.label == cl.preheader:
                t = b.terminator
                t = Instr(t.kind, t.dest, t.args,
                          tuple(label if x == cl.header else x for x in t.targets), t.callee)
                b = Block(b.label, b.body + (t,))
            blocks.append(b)
        return fn.with_blocks(blocks)
    return None


def _loopunroll_function(fn: Function) -> Function:
    while True:
        new = _unroll_one(fn)
        if new is None:
            return fn
        fn = new


def loopunroll(m: Module) -> Module:
    return m.with_functions(_loopunroll_function(fn) for fn in m.functions)
