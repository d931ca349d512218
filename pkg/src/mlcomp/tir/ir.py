"""Data model for the Tiny IR (TIR).

Registers are plain strings (the name without the ``%`` sigil), literals are
Python ints and global array references are :class:`Global` instances.  All
containers are tuples so modules can be shared freely between passes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Union

INT_MIN = -(1 << 63)
INT_MAX = (1 << 63) - 1
_MASK = (1 << 64) - 1


def wrap(value: int) -> int:
    """Reduce an arbitrary int to signed 64-bit two's complement."""
    if INT_MIN <= value <= INT_MAX:
        return value
    value &= _MASK
    return value - (1 << 64) if value > INT_MAX else value


KINDS: tuple[str, ...] = (
    "const", "copy",
    "add", "sub", "mul", "div", "rem",
    "lt", "le", "eq",
    "and", "or", "xor", "shl", "shr",
    "load", "store", "call",
    "ret", "br", "jmp", "print",
)
KIND_INDEX = {k: i for i, k in enumerate(KINDS)}

BINARY = frozenset(
    ["add", "sub", "mul", "div", "rem", "lt", "le", "eq", "and", "or", "xor", "shl", "shr"]
)
COMMUTATIVE = frozenset(["add", "mul", "eq", "and", "or", "xor"])
TRAPPING = frozenset(["div", "rem"])
# no side effects and cannot trap: safe to delete, hoist or duplicate
PURE = frozenset(["const", "copy"]) | (BINARY - TRAPPING)
TERMINATORS = frozenset(["ret", "br", "jmp"])
ARITHMETIC = BINARY
MEMORY = frozenset(["load", "store"])
CONTROL = TERMINATORS


@dataclass(frozen=True, slots=True)
class Global:
    """Operand naming a global array."""

    name: str

    def __str__(self) -> str:
        return "@" + self.name


Operand = Union[str, int, Global]


def is_reg(op: object) -> bool:
    return isinstance(op, str)


@dataclass(frozen=True, slots=True)
class Instr:
    kind: str
    dest: str | None = None
    args: tuple[Operand, ...] = ()
    targets: tuple[str, ...] = ()
    callee: str | None = None

    @property
    def is_terminator(self) -> bool:
        return self.kind in TERMINATORS

    def uses(self) -> list[str]:
        """Registers read by this instruction."""
        return [a for a in self.args if isinstance(a, str)]

    def replace_args(self, args) -> "Instr":
        return Instr(self.kind, self.dest, tuple(args), self.targets, self.callee)


@dataclass(frozen=True)
class Block:
    label: str
    instrs: tuple[Instr, ...]

    @property
    def terminator(self) -> Instr:
        return self.instrs[-1]

    @property
    def body(self) -> tuple[Instr, ...]:
        return self.instrs[:-1]

    def successors(self) -> tuple[str, ...]:
        return self.instrs[-1].targets if self.instrs else ()


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple[str, ...]
    blocks: tuple[Block, ...]

    @cached_property
    def block_map(self) -> dict[str, Block]:
        return {b.label: b for b in self.blocks}

    @property
    def entry(self) -> Block:
        return self.blocks[0]

    def instr_count(self) -> int:
        return sum(len(b.instrs) for b in self.blocks)

    def with_blocks(self, blocks) -> "Function":
        return Function(self.name, self.params, tuple(blocks))


@dataclass(frozen=True)
class Module:
    functions: tuple[Function, ...]
    globals: tuple[tuple[str, int], ...] = ()
    entry: str = "main"

    @cached_property
    def function_map(self) -> dict[str, Function]:
        return {f.name: f for f in self.functions}

    @cached_property
    def global_map(self) -> dict[str, int]:
        return dict(self.globals)

    def function(self, name: str) -> Function:
        return self.function_map[name]

    def instr_count(self) -> int:
        return sum(f.instr_count() for f in self.functions)

    def with_functions(self, functions) -> "Module":
        return Module(tuple(functions), self.globals, self.entry)

    def replace_function(self, fn: Function) -> "Module":
        return self.with_functions(fn if f.name == fn.name else f for f in self.functions)


class TirError(Exception):
    """Base class for parse and verification errors."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None,
                 where: str | None = None):
        self.message = message
        self.line = line
        self.col = col
        self.where = where
        loc = ""
        if line is not None:
            loc = f"{line}:{col}: "
        elif where:
            loc = f"{where}: "
        super().__init__(loc + message)


class TirSyntaxError(TirError):
    pass


class TirVerifyError(TirError):
    pass
