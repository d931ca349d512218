"""Static code features: a fixed 63-entry vector computed from a TIR module.

All entries are order-independent aggregates over every function in the
module, so permuting functions never changes the vector.  Ratios are 0 when
their denominator is 0.
"""

from __future__ import annotations

from dataclasses import dataclass

from .costmodel import static_counts
from .tir.analysis import compute_cfg, compute_loops, match_counted_loop, recursive_functions
from .tir.ir import BINARY, KINDS, MEMORY, TERMINATORS, Module

MANIFEST_VERSION = 1

_CFG = [
    ("cfg.functions", "number of functions"),
    ("cfg.blocks", "number of basic blocks"),
    ("cfg.edges", "number of CFG edges (a br contributes two)"),
    ("cfg.unreachable_blocks", "blocks not reachable from their function's entry"),
    ("cfg.max_out_degree", "largest number of distinct successors of a block"),
    ("cfg.cond_branches", "number of br terminators"),
    ("cfg.uncond_jumps", "number of jmp terminators"),
    ("cfg.returns", "number of ret terminators"),
    ("cfg.mean_block_size", "instructions per block"),
]
_LOOPS = [
    ("loop.count", "number of natural loops"),
    ("loop.max_depth", "deepest loop nesting level (0 without loops)"),
    ("loop.body_instrs", "instructions summed over all loop bodies"),
    ("loop.innermost", "loops containing no other loop"),
    ("loop.counted", "loops matching the canonical counted form"),
    ("loop.preheaders", "loops with a unique preheader block"),
    ("loop.mean_body_instrs", "mean instructions per loop body"),
    ("loop.max_trip_count", "largest static trip count among counted loops"),
]
_CALLS = [
    ("call.sites", "number of call instructions"),
    ("call.distinct_callees", "functions called at least once"),
    ("call.leaf_functions", "functions that contain no call"),
    ("call.max_out_degree", "most distinct callees of one function"),
    ("call.recursive_functions", "functions that can reach themselves in the call graph"),
    ("call.mean_callee_size", "mean instruction count of called functions"),
    ("call.max_callee_size", "largest instruction count of a called function"),
    ("call.sites_in_loops", "call instructions located inside a loop"),
]
_DIST = [
    ("func.min_instrs", "fewest instructions in a function"),
    ("func.max_instrs", "most instructions in a function"),
    ("func.mean_instrs", "mean instructions per function"),
    ("func.min_blocks", "fewest blocks in a function"),
    ("func.max_blocks", "most blocks in a function"),
    ("func.mean_blocks", "mean blocks per function"),
    ("func.params", "parameters summed over functions"),
    ("module.globals", "number of global arrays"),
]
_RATIOS = [
    ("ratio.arithmetic", "binary arithmetic/logic instructions over all instructions"),
    ("ratio.memory", "load and store instructions over all instructions"),
    ("ratio.control", "terminators over all instructions"),
    ("ratio.call", "call instructions over all instructions"),
    ("ratio.const", "const instructions over all instructions"),
    ("ratio.copy", "copy instructions over all instructions"),
    ("ratio.loop_body", "instructions inside some loop over all instructions"),
    ("ratio.in_looping_functions", "instructions in functions that contain a loop over all instructions"),
]

_MANIFEST = tuple(
    [(f"count.{k}", f"static number of {k} instructions") for k in KINDS]
    + _CFG + _LOOPS + _CALLS + _DIST + _RATIOS
)
N_FEATURES = len(_MANIFEST)
FEATURE_NAMES = tuple(name for name, _ in _MANIFEST)
assert N_FEATURES == 63


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]
    manifest_version: int = MANIFEST_VERSION

    def __len__(self) -> int:
        return len(self.values)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values))


def feature_manifest() -> list[tuple[int, str, str]]:
    return [(i, name, desc) for i, (name, desc) in enumerate(_MANIFEST)]


def _ratio(a, b) -> float:
    return a / b if b else 0.0


def extract_features(m: Module) -> FeatureVector:
    counts = static_counts(m)
    total = sum(counts)
    by_kind = dict(zip(KINDS, counts))

    n_blocks = edges = unreachable = max_out = 0
    n_loops = max_depth = body_instrs = innermost = counted = preheaders = 0
    max_trip = 0
    sites_in_loops = 0
    loop_instrs = 0
    looping_fn_instrs = 0
    for fn in m.functions:
        cfg = compute_cfg(fn)
        n_blocks += len(fn.blocks)
        edges += len(cfg.edges)
        unreachable += len(fn.blocks) - len(cfg.reachable)
        max_out = max([max_out] + [len(set(s)) for s in cfg.succs.values()])
        info = compute_loops(fn, cfg)
        sizes = {b.label: len(b.instrs) for b in fn.blocks}
        inner = info.innermost()
        for loop in info.loops:
            n_loops += 1
            max_depth = max(max_depth, loop.depth)
            body_instrs += sum(sizes[label] for label in loop.body)
            preheaders += loop.preheader is not None
            cl = match_counted_loop(fn, loop, cfg)
            if cl is not None:
                counted += 1
                max_trip = max(max_trip, cl.trip_count)
        innermost += len(inner)
        in_loop = set().union(*(lp.body for lp in info.loops)) if info.loops else set()
        loop_instrs += sum(sizes[label] for label in in_loop)
        sites_in_loops += sum(1 for b in fn.blocks if b.label in in_loop
                              for ins in b.instrs if ins.kind == "call")
        if info.loops:
            looping_fn_instrs += fn.instr_count()

    callees_of = {f.name: {i.callee for b in f.blocks for i in b.instrs if i.kind == "call"}
                  for f in m.functions}
    called = set().union(*callees_of.values()) if callees_of else set()
    callee_sizes = [m.function(name).instr_count() for name in sorted(called)]
    fn_instrs = [f.instr_count() for f in m.functions] or [0]
    fn_blocks = [len(f.blocks) for f in m.functions] or [0]

    values: list[float] = [float(c) for c in counts]
    values += [
        len(m.functions), n_blocks, edges, unreachable, max_out,
        by_kind["br"], by_kind["jmp"], by_kind["ret"], _ratio(total, n_blocks),
    ]
    values += [
        n_loops, max_depth, body_instrs, innermost, counted, preheaders,
        _ratio(body_instrs, n_loops), max_trip,
    ]
    values += [
        by_kind["call"], len(called), sum(1 for c in callees_of.values() if not c),
        max((len(c) for c in callees_of.values()), default=0),
        len(recursive_functions(m)),
        _ratio(sum(callee_sizes), len(callee_sizes)), max(callee_sizes, default=0),
        sites_in_loops,
    ]
    values += [
        min(fn_instrs), max(fn_instrs), _ratio(sum(fn_instrs), len(m.functions)),
        min(fn_blocks), max(fn_blocks), _ratio(sum(fn_blocks), len(m.functions)),
        sum(len(f.params) for f in m.functions), len(m.globals),
    ]
    values += [
        _ratio(sum(by_kind[k] for k in BINARY), total),
        _ratio(sum(by_kind[k] for k in MEMORY), total),
        _ratio(sum(by_kind[k] for k in TERMINATORS), total),
        _ratio(by_kind["call"], total),
        _ratio(by_kind["const"], total),
        _ratio(by_kind["copy"], total),
        _ratio(loop_instrs, total),
        _ratio(looping_fn_instrs, total),
    ]
    return FeatureVector(tuple(float(v) for v in values))


__all__ = ["MANIFEST_VERSION", "N_FEATURES", "FEATURE_NAMES", "FeatureVector",
           "feature_manifest", "extract_features"]
