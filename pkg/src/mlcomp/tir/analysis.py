"""Control-flow, dominator, loop, liveness and call-graph analyses."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .ir import INT_MAX, Function, Module


@dataclass(frozen=True)
class CFG:
    edges: tuple[tuple[str, str], ...]
    succs: dict[str, tuple[str, ...]]
    preds: dict[str, tuple[str, ...]]
    reachable: frozenset[str]
    order: tuple[str, ...]  # block labels in layout order

    @property
    def reverse_edges(self) -> tuple[tuple[str, str], ...]:
        return tuple((v, u) for u, v in self.edges)


def compute_cfg(fn: Function) -> CFG:
    """Edges follow terminator targets: ``br`` gives two, ``jmp`` one, ``ret`` none."""
    edges: list[tuple[str, str]] = []
    succs: dict[str, tuple[str, ...]] = {}
    preds: dict[str, list[str]] = {b.label: [] for b in fn.blocks}
    for b in fn.blocks:
        targets = b.successors()
        succs[b.label] = targets
        for t in targets:
            edges.append((b.label, t))
            if b.label not in preds[t]:
                preds[t].append(b.label)
    seen = {fn.blocks[0].label}
    work = deque([fn.blocks[0].label])
    while work:
        u = work.popleft()
        for v in succs[u]:
            if v not in seen:
                seen.add(v)
                work.append(v)
    return CFG(
        tuple(edges),
        succs,
        {k: tuple(v) for k, v in preds.items()},
        frozenset(seen),
        tuple(b.label for b in fn.blocks),
    )


def compute_dominators(fn: Function, cfg: CFG | None = None) -> dict[str, frozenset[str]]:
    """Iterative dataflow dominators over reachable blocks."""
    cfg = cfg or compute_cfg(fn)
    entry = fn.blocks[0].label
    nodes = [label for label in cfg.order if label in cfg.reachable]
    everything = frozenset(nodes)
    dom = {n: everything for n in nodes}
    dom[entry] = frozenset([entry])
    changed = True
    while changed:
        changed = False
        for n in nodes:
            if n == entry:
                continue
            ps = [p for p in cfg.preds[n] if p in cfg.reachable]
            new = frozenset.intersection(*(dom[p] for p in ps)) if ps else frozenset()
            new = new | {n}
            if new != dom[n]:
                dom[n] = new
                changed = True
    return dom


@dataclass(frozen=True)
class Loop:
    header: str
    body: frozenset[str]
    depth: int
    preheader: str | None
    latches: tuple[str, ...]

    def contains(self, other: "Loop") -> bool:
        return other.header != self.header and other.body <= self.body


@dataclass(frozen=True)
class LoopInfo:
    loops: tuple[Loop, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.loops)

    def __iter__(self):
        return iter(self.loops)

    def innermost(self) -> list[Loop]:
        return [lp for lp in self.loops if not any(lp.contains(o) for o in self.loops)]

    def depth_of(self, label: str) -> int:
        return max((lp.depth for lp in self.loops if label in lp.body), default=0)


def compute_loops(fn: Function, cfg: CFG | None = None) -> LoopInfo:
    cfg = cfg or compute_cfg(fn)
    dom = compute_dominators(fn, cfg)
    latches: dict[str, list[str]] = {}
    for u, h in cfg.edges:
        if u in cfg.reachable and h in dom.get(u, ()):
            if u not in latches.setdefault(h, []):
                latches[h].append(u)
    raw: list[tuple[str, frozenset[str], tuple[str, ...]]] = []
    for h in cfg.order:
        if h not in latches:
            continue
        body = {h}
        work = [u for u in latches[h] if u != h]
        body.update(work)
        while work:
            n = work.pop()
            for p in cfg.preds[n]:
                if p in cfg.reachable and p not in body:
                    body.add(p)
                    work.append(p)
        raw.append((h, frozenset(body), tuple(latches[h])))
    loops = []
    for h, body, lat in raw:
        depth = 1 + sum(1 for h2, b2, _ in raw if h2 != h and body <= b2)
        outside = [p for p in cfg.preds[h] if p not in body and p in cfg.reachable]
        pre = None
        # the entry block is also entered from outside the CFG
        if h != cfg.order[0] and len(outside) == 1 and set(cfg.succs[outside[0]]) == {h}:
            pre = outside[0]
        loops.append(Loop(h, body, depth, pre, lat))
    return LoopInfo(tuple(loops))


def block_use_def(block) -> tuple[set[str], set[str]]:
    use: set[str] = set()
    defs: set[str] = set()
    for ins in block.instrs:
        for r in ins.uses():
            if r not in defs:
                use.add(r)
        if ins.dest is not None:
            defs.add(ins.dest)
    return use, defs


def liveness(fn: Function, cfg: CFG | None = None) -> tuple[dict[str, set[str]], dict[str, set[str]]]:
    """Return (live_in, live_out) register sets per block."""
    cfg = cfg or compute_cfg(fn)
    ud = {b.label: block_use_def(b) for b in fn.blocks}
    live_in: dict[str, set[str]] = {b.label: set() for b in fn.blocks}
    live_out: dict[str, set[str]] = {b.label: set() for b in fn.blocks}
    order = list(reversed(cfg.order))
    changed = True
    while changed:
        changed = False
        for label in order:
            out: set[str] = set()
            for s in cfg.succs[label]:
                out |= live_in[s]
            use, defs = ud[label]
            new_in = use | (out - defs)
            if new_in != live_in[label] or out != live_out[label]:
                live_in[label] = new_in
                live_out[label] = out
                changed = True
    return live_in, live_out


def defined_in(fn: Function) -> dict[str, set[str]]:
    """Registers definitely assigned on entry to each reachable block."""
    cfg = compute_cfg(fn)
    entry = fn.blocks[0].label
    all_regs = set(fn.params)
    for b in fn.blocks:
        for ins in b.instrs:
            if ins.dest is not None:
                all_regs.add(ins.dest)
    defs_of = {b.label: {i.dest for i in b.instrs if i.dest is not None} for b in fn.blocks}
    nodes = [n for n in cfg.order if n in cfg.reachable]
    d_in = {n: set(all_regs) for n in nodes}
    d_in[entry] = set(fn.params)
    changed = True
    while changed:
        changed = False
        for n in nodes:
            if n == entry:
                continue
            ps = [p for p in cfg.preds[n] if p in cfg.reachable]
            new = set(all_regs)
            for p in ps:
                new &= d_in[p] | defs_of[p]
            if new != d_in[n]:
                d_in[n] = new
                changed = True
    return d_in


def call_graph(m: Module) -> dict[str, set[str]]:
    return {
        f.name: {i.callee for b in f.blocks for i in b.instrs if i.kind == "call"}
        for f in m.functions
    }


def recursive_functions(m: Module) -> set[str]:
    """Functions that can (transitively) call themselves."""
    graph = call_graph(m)
    out = set()
    for f in graph:
        seen: set[str] = set()
        work = list(graph[f])
        while work:
            g = work.pop()
            if g == f:
                out.add(f)
                break
            if g in seen or g not in graph:
                continue
            seen.add(g)
            work.extend(graph[g])
    return out


@dataclass(frozen=True)
class CountedLoop:
    """A two-block loop ``pre -> header <-> body`` with a literal trip count."""

    header: str
    body: str
    preheader: str
    exit: str
    counter: str
    init: int
    bound: int
    step: int
    trip_count: int


def match_counted_loop(fn: Function, loop: Loop, cfg: CFG | None = None) -> CountedLoop | None:
    cfg = cfg or compute_cfg(fn)
    if len(loop.body) != 2 or loop.preheader is None:
        return None
    h = fn.block_map[loop.header]
    (b_label,) = loop.body - {loop.header}
    b = fn.block_map[b_label]
    if len(h.instrs) != 2:
        return None
    cmp, br = h.instrs
    if cmp.kind != "lt" or br.kind != "br" or br.args[0] != cmp.dest:
        return None
    counter, bound = cmp.args
    if not isinstance(counter, str) or not isinstance(bound, int) or counter == cmp.dest:
        return None
    if br.targets[0] != b_label or br.targets[1] in loop.body:
        return None
    if b.terminator.kind != "jmp" or b.terminator.targets[0] != loop.header:
        return None
    if set(cfg.preds[loop.header]) != {loop.preheader, b_label} or cfg.preds[b_label] != (loop.header,):
        return None
    step = None
    for ins in b.body:
        if ins.dest == counter:
            if step is not None or ins.kind != "add":
                return None
            x, y = ins.args
            if x == counter and isinstance(y, int):
                step = y
            elif y == counter and isinstance(x, int):
                step = x
            else:
                return None
    if step is None or step <= 0:
        return None
    init = None
    for ins in fn.block_map[loop.preheader].instrs:
        if ins.dest == counter:
            init = ins.args[0] if ins.kind == "const" else None
    if init is None or bound + step > INT_MAX:
        return None
    trips = 0 if init >= bound else -((init - bound) // step)
    return CountedLoop(loop.header, b_label, loop.preheader, br.targets[1], counter,
                       init, bound, step, trips)
