"""Deterministic TIR interpreter.

Each function is lowered once per run into a flat list of tuples whose
operands index a per-frame register file.  Literals get their own slots in
that file so every operand read is a plain list index.
"""

from __future__ import annotations

from dataclasses import dataclass

from .tir.ir import INT_MAX, INT_MIN, KIND_INDEX, KINDS, Module

DEFAULT_FUEL = 10_000_000
MAX_CALL_DEPTH = 10_000

(CONST, COPY, ADD, SUB, MUL, DIV, REM, LT, LE, EQ, AND, OR, XOR, SHL, SHR,
 LOAD, STORE, CALL, RET, BR, JMP, PRINT) = range(len(KINDS))

_SPAN = 1 << 64
_MASK = _SPAN - 1


class TrapError(Exception):
    """Runtime fault raised by the interpreter at a program point."""

    def __init__(self, message: str, function: str, block: str, index: int):
        self.function = function
        self.block = block
        self.index = index
        super().__init__(f"{message} at @{function}:{block}[{index}]")


class FuelExhausted(TrapError):
    pass


class DivisionByZero(TrapError):
    pass


class OutOfBounds(TrapError):
    pass


class StackOverflow(TrapError):
    pass


@dataclass(frozen=True)
class ExecOutcome:
    exit_value: int
    print_trace: tuple[int, ...]
    counts: tuple[int, ...]  # executed instructions per kind, ordered as KINDS

    @property
    def executed_instructions(self) -> int:
        return sum(self.counts)

    def count_map(self) -> dict[str, int]:
        return dict(zip(KINDS, self.counts))

    @property
    def observables(self) -> tuple[int, tuple[int, ...]]:
        return self.exit_value, self.print_trace


class _Compiled:
    __slots__ = ("name", "code", "template", "params", "locs")

    def __init__(self, name, code, template, params, locs):
        self.name = name
        self.code = code
        self.template = template
        self.params = params
        self.locs = locs


def _compile(m: Module) -> dict[str, _Compiled]:
    gindex = {g: i for i, (g, _) in enumerate(m.globals)}
    out: dict[str, _Compiled] = {}
    for fn in m.functions:
        slots: dict[object, int] = {}
        template: list = []

        def slot(op):
            key = op if isinstance(op, str) else ("lit", op)
            if key not in slots:
                slots[key] = len(template)
                template.append(None if isinstance(op, str) else op)
            return slots[key]

        for p in fn.params:
            slot(p)
        starts: dict[str, int] = {}
        pc = 0
        for b in fn.blocks:
            starts[b.label] = pc
            pc += len(b.instrs)
        code: list[tuple] = []
        locs: list[tuple[str, int]] = []
        for b in fn.blocks:
            for idx, ins in enumerate(b.instrs):
                k = KIND_INDEX[ins.kind]
                a = ins.args
                if k == LOAD:
                    t = (k, slot(ins.dest), gindex[a[0].name], slot(a[1]))
                elif k == STORE:
                    t = (k, slot(a[0]), gindex[a[1].name], slot(a[2]))
                elif k == CALL:
                    t = (k, slot(ins.dest), ins.callee, tuple(slot(x) for x in a))
                elif k == BR:
                    t = (k, slot(a[0]), starts[ins.targets[0]], starts[ins.targets[1]])
                elif k == JMP:
                    t = (k, starts[ins.targets[0]])
                elif k in (RET, PRINT):
                    t = (k, slot(a[0]))
                elif k in (CONST, COPY):
                    t = (k, slot(ins.dest), slot(a[0]))
                else:
                    t = (k, slot(ins.dest), slot(a[0]), slot(a[1]))
                code.append(t)
                locs.append((b.label, idx))
        params = tuple(slots[p] for p in fn.params)
        out[fn.name] = _Compiled(fn.name, code, template, params, locs)
    return out


def _trap(cls, fn: _Compiled, pc: int, msg: str):
    block, idx = fn.locs[pc]
    return cls(msg, fn.name, block, idx)


def interpret(m: Module, fuel: int = DEFAULT_FUEL) -> ExecOutcome:
    """Run ``m`` from its entry function with zeroed globals."""
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    funcs = _compile(m)
    mem = [[0] * length for _, length in m.globals]
    counts = [0] * len(KINDS)
    trace: list[int] = []
    stack: list[tuple] = []

    fn = funcs[m.entry]
    code = fn.code
    r = list(fn.template)
    pc = 0
    steps = 0
    lo, hi = INT_MIN, INT_MAX
    while True:
        ins = code[pc]
        if steps >= fuel:
            raise _trap(FuelExhausted, fn, pc, f"fuel of {fuel} instructions exhausted")
        steps += 1
        op = ins[0]
        counts[op] += 1
        if op == ADD:
            v = r[ins[2]] + r[ins[3]]
            if v < lo or v > hi:
                v = ((v - lo) & _MASK) + lo
            r[ins[1]] = v
        elif op == CONST or op == COPY:
            r[ins[1]] = r[ins[2]]
        elif op == LT:
            r[ins[1]] = 1 if r[ins[2]] < r[ins[3]] else 0
        elif op == BR:
            pc = ins[2] if r[ins[1]] != 0 else ins[3]
            continue
        elif op == JMP:
            pc = ins[1]
            continue
        elif op == LOAD:
            arr = mem[ins[2]]
            i = r[ins[3]]
            if i < 0 or i >= len(arr):
                raise _trap(OutOfBounds, fn, pc, f"load index {i} out of bounds")
            r[ins[1]] = arr[i]
        elif op == STORE:
            arr = mem[ins[2]]
            i = r[ins[3]]
            if i < 0 or i >= len(arr):
                raise _trap(OutOfBounds, fn, pc, f"store index {i} out of bounds")
            arr[i] = r[ins[1]]
        elif op == SUB:
            v = r[ins[2]] - r[ins[3]]
            if v < lo or v > hi:
                v = ((v - lo) & _MASK) + lo
            r[ins[1]] = v
        elif op == MUL:
            v = r[ins[2]] * r[ins[3]]
            if v < lo or v > hi:
                v = ((v - lo) & _MASK) + lo
            r[ins[1]] = v
        elif op == LE:
            r[ins[1]] = 1 if r[ins[2]] <= r[ins[3]] else 0
        elif op == EQ:
            r[ins[1]] = 1 if r[ins[2]] == r[ins[3]] else 0
        elif op == DIV or op == REM:
            a = r[ins[2]]
            b = r[ins[3]]
            if b == 0:
                raise _trap(DivisionByZero, fn, pc, "division by zero")
            q = abs(a) // abs(b)
            if (a < 0) != (b < 0):
                q = -q
            v = q if op == DIV else a - b * q
            if v < lo or v > hi:
                v = ((v - lo) & _MASK) + lo
            r[ins[1]] = v
        elif op == AND:
            r[ins[1]] = r[ins[2]] & r[ins[3]]
        elif op == OR:
            r[ins[1]] = r[ins[2]] | r[ins[3]]
        elif op == XOR:
            r[ins[1]] = r[ins[2]] ^ r[ins[3]]
        elif op == SHL:
            v = r[ins[2]] << (r[ins[3]] & 63)
            if v < lo or v > hi:
                v = ((v - lo) & _MASK) + lo
            r[ins[1]] = v
        elif op == SHR:
            r[ins[1]] = r[ins[2]] >> (r[ins[3]] & 63)
        elif op == CALL:
            if len(stack) >= MAX_CALL_DEPTH:
                raise _trap(StackOverflow, fn, pc, "call depth limit exceeded")
            callee = funcs[ins[2]]
            nr = list(callee.template)
            for dst, src in zip(callee.params, ins[3]):
                nr[dst] = r[src]
            stack.append((fn, code, r, pc + 1, ins[1]))
            fn = callee
            code = fn.code
            r = nr
            pc = 0
            continue
        elif op == RET:
            value = r[ins[1]]
            if not stack:
                return ExecOutcome(value, tuple(trace), tuple(counts))
            fn, code, r, pc, dst = stack.pop()
            r[dst] = value
            continue
        elif op == PRINT:
            trace.append(r[ins[1]])
        pc += 1


def observables(m: Module, fuel: int = DEFAULT_FUEL):
    """Exit value and print trace, or the trap class name when execution faults."""
    try:
        return interpret(m, fuel).observables
    except TrapError as exc:
        return type(exc).__name__


__all__ = [
    "DEFAULT_FUEL", "ExecOutcome", "TrapError", "FuelExhausted", "DivisionByZero",
    "OutOfBounds", "StackOverflow", "interpret", "observables",
]
