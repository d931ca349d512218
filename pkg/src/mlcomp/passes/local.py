"""Block-local phases: folding, propagation, CSE, strength reduction, dead stores."""

from __future__ import annotations

from ..tir.ir import BINARY, COMMUTATIVE, Block, Function, Global, Instr, Module, wrap


def fold_binary(kind: str, a: int, b: int) -> int | None:
    """Evaluate a binary op on i64 values; ``None`` when it would trap."""
    if kind == "add":
        return wrap(a + b)
    if kind == "sub":
        return wrap(a - b)
    if kind == "mul":
        return wrap(a * b)
    if kind in ("div", "rem"):
        if b == 0:
            return None
        q = abs(a) // abs(b)
        if (a < 0) != (b < 0):
            q = -q
        return wrap(q) if kind == "div" else wrap(a - b * q)
    if kind == "lt":
        return int(a < b)
    if kind == "le":
        return int(a <= b)
    if kind == "eq":
        return int(a == b)
    if kind == "and":
        return a & b
    if kind == "or":
        return a | b
    if kind == "xor":
        return a ^ b
    if kind == "shl":
        return wrap(a << (b & 63))
    if kind == "shr":
        return a >> (b & 63)
    raise ValueError(kind)


def map_blocks(m: Module, fn_block) -> Module:
    functions = []
    for fn in m.functions:
        blocks = [Block(b.label, tuple(fn_block(b, m))) for b in fn.blocks]
        functions.append(Function(fn.name, fn.params, tuple(blocks)))
    return m.with_functions(functions)


def _constfold_block(block: Block, m: Module) -> list[Instr]:
    known: dict[str, int] = {}
    out = []
    for ins in block.instrs:
        new = ins
        if ins.kind == "const" or ins.kind == "copy" or ins.kind in BINARY:
            vals = []
            for a in ins.args:
                if isinstance(a, int):
                    vals.append(a)
                elif a in known:
                    vals.append(known[a])
                else:
                    vals = None
                    break
            if vals is not None:
                value = vals[0] if len(vals) == 1 else fold_binary(ins.kind, vals[0], vals[1])
                if value is not None and not (ins.kind == "const"):
                    new = Instr("const", ins.dest, (value,))
        out.append(new)
        if new.dest is not None:
            if new.kind == "const":
                known[new.dest] = new.args[0]
            else:
                known.pop(new.dest, None)
    return out


def constfold(m: Module) -> Module:
    return map_blocks(m, _constfold_block)


def _constprop_block(block: Block, m: Module) -> list[Instr]:
    consts: dict[str, int] = {}
    out = []
    for ins in block.instrs:
        if consts and any(isinstance(a, str) and a in consts for a in ins.args):
            ins = ins.replace_args(consts.get(a, a) if isinstance(a, str) else a for a in ins.args)
        out.append(ins)
        if ins.dest is not None:
            if ins.kind == "const":
                consts[ins.dest] = ins.args[0]
            else:
                consts.pop(ins.dest, None)
    return out


def constprop(m: Module) -> Module:
    return map_blocks(m, _constprop_block)


def _copyprop_block(block: Block, m: Module) -> list[Instr]:
    copies: dict[str, object] = {}
    out = []
    for ins in block.instrs:
        if copies and any(isinstance(a, str) and a in copies for a in ins.args):
            ins = ins.replace_args(copies.get(a, a) if isinstance(a, str) else a for a in ins.args)
        out.append(ins)
        d = ins.dest
        if d is not None:
            copies.pop(d, None)
            for k in [k for k, v in copies.items() if v == d]:
                del copies[k]
            if ins.kind == "copy" and ins.args[0] != d:
                copies[d] = ins.args[0]
    return out


def copyprop(m: Module) -> Module:
    return map_blocks(m, _copyprop_block)


def _operand_key(a) -> tuple:
    if isinstance(a, int):
        return (0, a)
    if isinstance(a, str):
        return (1, a)
    return (2, a.name)


def _cse_block(block: Block, m: Module) -> list[Instr]:
    avail: dict[tuple, str] = {}
    out = []
    for ins in block.instrs:
        key = None
        if ins.kind in BINARY:
            args = ins.args
            if ins.kind in COMMUTATIVE:
                args = tuple(sorted(args, key=_operand_key))
            key = (ins.kind, args)
            if key in avail and avail[key] != ins.dest:
                ins = Instr("copy", ins.dest, (avail[key],))
        out.append(ins)
        d = ins.dest
        if d is not None:
            stale = [k for k, v in avail.items() if v == d or d in k[1]]
            for k in stale:
                del avail[k]
            if key is not None and ins.kind != "copy" and d not in key[1]:
                avail[key] = d
    return out


def cse(m: Module) -> Module:
    return map_blocks(m, _cse_block)


def _log2(v) -> int | None:
    if isinstance(v, int) and v > 1 and v & (v - 1) == 0 and v.bit_length() <= 63:
        return v.bit_length() - 1
    return None


def _strengthred_block(block: Block, m: Module) -> list[Instr]:
    out = []
    for ins in block.instrs:
        if ins.kind == "mul":
            x, y = ins.args
            if y == 1 and not isinstance(y, Global):
                ins = Instr("copy", ins.dest, (x,))
            elif x == 1 and not isinstance(x, Global):
                ins = Instr("copy", ins.dest, (y,))
            elif _log2(y) is not None:
                ins = Instr("shl", ins.dest, (x, _log2(y)))
            elif _log2(x) is not None:
                ins = Instr("shl", ins.dest, (y, _log2(x)))
        elif ins.kind == "add":
            x, y = ins.args
            if y == 0 and isinstance(y, int):
                ins = Instr("copy", ins.dest, (x,))
            elif x == 0 and isinstance(x, int):
                ins = Instr("copy", ins.dest, (y,))
        out.append(ins)
    return out


def strengthred(m: Module) -> Module:
    return map_blocks(m, _strengthred_block)


def _deadstore_block(block: Block, m: Module) -> list[Instr]:
    overwritten: set[tuple[str, int]] = set()
    kept = []
    for ins in reversed(block.instrs):
        if ins.kind in ("load", "call"):
            overwritten.clear()
        elif ins.kind == "store":
            g, idx = ins.args[1].name, ins.args[2]
            if isinstance(idx, int) and 0 <= idx < m.global_map[g]:
                if (g, idx) in overwritten:
                    continue
                overwritten.add((g, idx))
        kept.append(ins)
    kept.reverse()
    return kept


def deadstore(m: Module) -> Module:
    return map_blocks(m, _deadstore_block)
