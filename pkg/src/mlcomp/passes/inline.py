"""Inlining of small non-recursive callees."""

from __future__ import annotations

from ..tir.analysis import recursive_functions
from ..tir.ir import Block, Function, Instr, Module

MAX_INLINE_SIZE = 12


def _names(fn: Function) -> set[str]:
    names = set(fn.params) | {b.label for b in fn.blocks}
    for b in fn.blocks:
        for ins in b.instrs:
            names.update(ins.uses())
            if ins.dest is not None:
                names.add(ins.dest)
    return names


def _rename(ins: Instr, prefix: str) -> Instr:
    args = tuple(prefix + a if isinstance(a, str) else a for a in ins.args)
    dest = prefix + ins.dest if ins.dest is not None else None
    return Instr(ins.kind, dest, args, tuple(prefix + t for t in ins.targets), ins.callee)


def _expand(caller: Function, callees: dict[str, Function]) -> Function:
    taken = _names(caller)
    counter = 0

    def fresh_prefix(callee: Function) -> str:
        nonlocal counter
        while True:
            prefix = f"i{counter}.{callee.name}."
            counter += 1
            if not any(n.startswith(prefix) for n in taken):
                return prefix

    out: list[Block] = []
    work = list(caller.blocks)
    while work:
        block = work.pop(0)
        site = next((i for i, ins in enumerate(block.instrs)
                     if ins.kind == "call" and ins.callee in callees), None)
        if site is None:
            out.append(block)
            continue
        call = block.instrs[site]
        callee = callees[call.callee]
        prefix = fresh_prefix(callee)
        cont = prefix + "cont"
        entry = prefix + callee.blocks[0].label
        head = list(block.instrs[:site])
        head.extend(Instr("copy", prefix + p, (a,)) for p, a in zip(callee.params, call.args))
        head.append(Instr("jmp", targets=(entry,)))
        out.append(Block(block.label, tuple(head)))
        for cb in callee.blocks:
            instrs = []
            for ins in cb.instrs:
                if ins.kind == "ret":
                    value = ins.args[0]
                    value = prefix + value if isinstance(value, str) else value
                    instrs.append(Instr("copy", call.dest, (value,)))
                    instrs.append(Instr("jmp", targets=(cont,)))
                else:
                    instrs.append(_rename(ins, prefix))
            out.append(Block(prefix + cb.label, tuple(instrs)))
        taken.update(prefix + n for n in _names(callee))
        taken.add(cont)
        # the continuation may hold further call sites
        work.insert(0, Block(cont, block.instrs[site + 1:]))
    return caller.with_blocks(out)


def inline(m: Module) -> Module:
    recursive = recursive_functions(m)
    callees = {f.name: f for f in m.functions
               if f.name not in recursive and f.instr_count() <= MAX_INLINE_SIZE}
    if not callees:
        return m
    functions = []
    for fn in m.functions:
        eligible = {name: f for name, f in callees.items() if name != fn.name}
        if any(ins.kind == "call" and ins.callee in eligible
               for b in fn.blocks for ins in b.instrs):
            fn = _expand(fn, eligible)
        functions.append(fn)
    return m.with_functions(functions)
