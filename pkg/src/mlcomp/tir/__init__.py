"""Tiny IR: data model, text format, verifier and analyses."""

from .analysis import (
    CFG, CountedLoop, Loop, LoopInfo, compute_cfg, compute_dominators, compute_loops,
    liveness, match_counted_loop, recursive_functions,
)
from .ir import (
    KINDS, KIND_INDEX, Block, Function, Global, Instr, Module, TirError, TirSyntaxError,
    TirVerifyError, wrap,
)
from .parser import parse_module
from .printer import format_instr, print_module, structurally_equal
from .verify import verify_module

__all__ = [
    "CFG", "CountedLoop", "Loop", "LoopInfo", "compute_cfg", "compute_dominators",
    "compute_loops", "liveness", "match_counted_loop", "recursive_functions",
    "KINDS", "KIND_INDEX", "Block", "Function", "Global", "Instr", "Module", "TirError",
    "TirSyntaxError", "TirVerifyError", "wrap", "parse_module", "format_instr",
    "print_module", "structurally_equal", "verify_module",
]
