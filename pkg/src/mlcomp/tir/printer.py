"""Canonical TIR printer.  Its output doubles as the structural identity."""

from __future__ import annotations

from .ir import Global, Instr, Module


def _op(op) -> str:
    if isinstance(op, str):
        return "%" + op
    if isinstance(op, Global):
        return "@" + op.name
    return str(op)


def format_instr(ins: Instr) -> str:
    k = ins.kind
    if k == "store":
        return "store " + ", ".join(_op(a) for a in ins.args)
    if k == "br":
        return f"br {_op(ins.args[0])}, {ins.targets[0]}, {ins.targets[1]}"
    if k == "jmp":
        return "jmp " + ins.targets[0]
    if k in ("ret", "print"):
        return f"{k} {_op(ins.args[0])}"
    if k == "call":
        args = ", ".join(_op(a) for a in ins.args)
        return f"%{ins.dest} = call @{ins.callee}({args})"
    return f"%{ins.dest} = {k} " + ", ".join(_op(a) for a in ins.args)


def print_module(m: Module) -> str:
    parts: list[str] = []
    if m.globals:
        parts.append("".join(f"global @{name}[{length}]\n" for name, length in m.globals))
    for fn in m.functions:
        lines = [f"func @{fn.name}(" + ", ".join("%" + p for p in fn.params) + ") {"]
        for block in fn.blocks:
            lines.append(block.label + ":")
            lines.extend("  " + format_instr(ins) for ins in block.instrs)
        lines.append("}")
        parts.append("\n".join(lines) + "\n")
    return "\n".join(parts)


def structurally_equal(a: Module, b: Module) -> bool:
    return a is b or print_module(a) == print_module(b)
