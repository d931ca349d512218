"""A slow, straightforward interpreter used as an oracle in tests."""

from fractions import Fraction


def _i64(v: int) -> int:
    return int.from_bytes((v % 2**64).to_bytes(8, "little"), "little", signed=True)


def _binary(kind, a, b):
    if kind == "div" or kind == "rem":
        if b == 0:
            raise ZeroDivisionError
        q = int(Fraction(a, b))  # truncates toward zero
        return _i64(q if kind == "div" else a - b * q)
    table = {
        "add": lambda: a + b, "sub": lambda: a - b, "mul": lambda: a * b,
        "lt": lambda: int(a < b), "le": lambda: int(a <= b), "eq": lambda: int(a == b),
        "and": lambda: a & b, "or": lambda: a | b, "xor": lambda: a ^ b,
        "shl": lambda: a * 2 ** (b % 64), "shr": lambda: a // 2 ** (b % 64),
    }
    return _i64(table[kind]())


def run(m, fuel=100000):
    """Returns (exit, trace, steps) where steps lists executed kinds in order."""
    mem = {name: [0] * n for name, n in m.globals}
    trace, steps = [], []

    def call(fname, argv):
        fn = m.function(fname)
        regs = dict(zip(fn.params, argv))
        blocks = fn.block_map
        block = fn.blocks[0]
        i = 0

        def val(x):
            return regs[x] if isinstance(x, str) else x

        while True:
            ins = block.instrs[i]
            steps.append(ins.kind)
            if len(steps) > fuel:
                raise RuntimeError("fuel")
            k = ins.kind
            if k in ("const", "copy"):
                regs[ins.dest] = val(ins.args[0])
            elif k == "load":
                g, idx = ins.args
                regs[ins.dest] = mem[g.name][val(idx)]
            elif k == "store":
                v, g, idx = ins.args
                mem[g.name][val(idx)] = val(v)
            elif k == "print":
                trace.append(val(ins.args[0]))
            elif k == "call":
                regs[ins.dest] = call(ins.callee, [val(a) for a in ins.args])
            elif k == "ret":
                return val(ins.args[0])
            elif k == "jmp":
                block, i = blocks[ins.targets[0]], 0
                continue
            elif k == "br":
                block, i = blocks[ins.targets[0 if val(ins.args[0]) else 1]], 0
                continue
            else:
                regs[ins.dest] = _binary(k, val(ins.args[0]), val(ins.args[1]))
            i += 1

    exit_value = call(m.entry, [])
    return exit_value, tuple(trace), steps
