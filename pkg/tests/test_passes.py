import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import module
from mlcomp.interp import interpret, observables
from mlcomp.passes import (
    PHASE_NAMES, UnknownPhaseError, apply_phase, list_phases, parse_phase_list, resolve_phase,
    run_sequence,
)
from mlcomp.tir import compute_loops, print_module, structurally_equal, verify_module

GOLDEN_ORDER = ("constfold", "constprop", "copyprop", "dce", "cse", "simplifycfg", "jumpthread",
                "licm", "loopunroll", "strengthred", "inline", "deadstore")


def body(text_module, fn="main"):
    """Instruction lines of a function, without labels."""
    out, inside = [], False
    for line in print_module(text_module).splitlines():
        if line.startswith(f"func @{fn}("):
            inside = True
        elif inside and line == "}":
            break
        elif inside and line.startswith("  "):
            out.append(line.strip())
    return out


def test_registry_golden():
    phases = list_phases()
    assert tuple(p.name for p in phases) == GOLDEN_ORDER == PHASE_NAMES
    assert [p.index for p in phases] == list(range(12))
    assert list_phases() == phases
    for p in phases:
        assert resolve_phase(p.name) == p == resolve_phase(p.index)


def test_unknown_phase():
    with pytest.raises(UnknownPhaseError, match="nosuch"):
        apply_phase(module("func @main() {\nb:\n  ret 0\n}"), "nosuch")
    with pytest.raises(UnknownPhaseError):
        parse_phase_list("dce, bogus")
    assert [p.name for p in parse_phase_list("dce, cse")] == ["dce", "cse"]


def test_constfold():
    m = module("func @main() {\nb:\n  %t = add 2, 3\n  ret %t\n}")
    res = apply_phase(m, "constfold")
    assert res.changed
    assert body(res.module) == ["%t = const 5", "ret %t"]


def test_constfold_leaves_trapping_division():
    m = module("func @main() {\nb:\n  %t = div 2, 0\n  ret %t\n}")
    assert not apply_phase(m, "constfold").changed


def test_dce_unchanged_returns_input():
    m = module("func @main() {\nb:\n  %t = const 5\n  ret %t\n}")
    res = apply_phase(m, "dce")
    assert not res.changed and res.module is m


def test_constprop_and_copyprop():
    m = module("func @main() {\nb:\n  %a = const 4\n  %b = copy %a\n  %c = add %b, %a\n  ret %c\n}")
    assert body(apply_phase(m, "constprop").module)[1:3] == ["%b = copy 4", "%c = add %b, 4"]
    assert body(apply_phase(m, "copyprop").module)[2] == "%c = add %a, %a"


def test_copyprop_stops_at_redefinition():
    m = module("func @f(%x) {\nb:\n  %a = copy %x\n  %x = add %x, 1\n  %r = add %a, 0\n  ret %r\n}\n"
               "func @main() {\nb:\n  %r = call @f(3)\n  ret %r\n}")
    assert body(apply_phase(m, "copyprop").module, "f")[2] == "%r = add %a, 0"


def test_cse():
    m = module("func @f(%x, %y) {\nb:\n  %a = add %x, %y\n  %b = add %y, %x\n  %c = mul %a, %b\n  ret %c\n}\n"
               "func @main() {\nb:\n  %r = call @f(3, 4)\n  ret %r\n}")
    out = apply_phase(m, "cse").module
    assert body(out, "f")[1] == "%b = copy %a"
    assert interpret(out).exit_value == 49


def test_simplifycfg():
    m = module("func @main() {\na:\n  br 1, b, c\nb:\n  %x = const 1\n  jmp d\nc:\n  %x = const 2\n"
               "  jmp d\nd:\n  ret %x\n}")
    out = apply_phase(m, "simplifycfg").module
    assert [b.label for b in out.functions[0].blocks] == ["a"]
    assert body(out) == ["%x = const 1", "ret %x"]


def test_jumpthread():
    m = module("func @main() {\na:\n  %c = const 0\n  br %c, b, c\nb:\n  jmp d\nc:\n  jmp d\nd:\n  ret 1\n}")
    out = apply_phase(m, "jumpthread").module
    assert out.functions[0].blocks[0].instrs[-1].targets == ("d", "d")


def test_licm_hoists_invariant(programs):
    m = module("func @main() {\nentry:\n  %i = const 0\n  %s = const 0\n  %k = const 5\n  jmp head\n"
               "head:\n  %c = lt %i, 10\n  br %c, loop, out\nloop:\n  %t = mul %k, 3\n"
               "  %s = add %s, %t\n  %i = add %i, 1\n  jmp head\nout:\n  ret %s\n}")
    out = apply_phase(m, "licm").module
    entry_block = out.functions[0].blocks[0]
    assert any(ins.kind == "mul" for ins in entry_block.instrs)
    assert all(ins.kind != "mul" for b in out.functions[0].blocks[1:] for ins in b.instrs)
    assert interpret(out).exit_value == interpret(m).exit_value == 150


def test_loopunroll_dotprod8(programs):
    m = programs["dotprod8"]
    res = apply_phase(m, "loopunroll")
    assert res.changed
    fn = res.module.function("main")
    assert len(compute_loops(m.function("main"))) == 2
    assert len(compute_loops(fn)) == 0
    unrolled = fn.block_map["fill.unrolled"]
    assert sum(ins.kind == "store" for ins in unrolled.instrs) == 2 * 8
    assert observables(res.module) == observables(m)


def test_loopunroll_skips_long_loops(programs):
    m = programs["sum1to10"]  # trip count 10 > 8
    assert not apply_phase(m, "loopunroll").changed


def test_strengthred():
    m = module("func @f(%x) {\nb:\n  %a = mul %x, 8\n  %b = mul 4, %x\n  %c = add %a, 0\n"
               "  %d = mul %c, 1\n  %e = mul %x, 6\n  %r = add %b, %d\n  %r = add %r, %e\n  ret %r\n}\n"
               "func @main() {\nb:\n  %r = call @f(-3)\n  ret %r\n}")
    out = apply_phase(m, "strengthred").module
    assert body(out, "f")[:5] == ["%a = shl %x, 3", "%b = shl %x, 2", "%c = copy %a",
                                  "%d = copy %c", "%e = mul %x, 6"]
    assert interpret(out).exit_value == interpret(m).exit_value == -3 * 8 - 12 - 18


def test_inline():
    m = module("func @sq(%x) {\nb:\n  %y = mul %x, %x\n  ret %y\n}\n"
               "func @main() {\nb:\n  %a = call @sq(3)\n  %b = call @sq(%a)\n  ret %b\n}")
    out = apply_phase(m, "inline").module
    assert all(ins.kind != "call" for b in out.function("main").blocks for ins in b.instrs)
    verify_module(out)
    assert interpret(out).exit_value == 81


def test_inline_skips_recursion():
    m = module("func @f(%n) {\nb:\n  %c = lt %n, 1\n  br %c, z, r\nz:\n  ret 0\nr:\n"
               "  %m = sub %n, 1\n  %v = call @f(%m)\n  ret %v\n}\n"
               "func @main() {\nb:\n  %a = call @f(3)\n  ret %a\n}")
    assert not apply_phase(m, "inline").changed


def test_deadstore():
    m = module("global @g[4]\nfunc @main() {\nb:\n  store 1, @g, 0\n  store 2, @g, 0\n"
               "  store 3, @g, 1\n  %v = load @g, 1\n  store 4, @g, 1\n  %w = load @g, 0\n"
               "  %r = add %v, %w\n  ret %r\n}")
    out = apply_phase(m, "deadstore").module
    assert body(out) == ["store 2, @g, 0", "store 3, @g, 1", "%v = load @g, 1",
                         "store 4, @g, 1", "%w = load @g, 0", "%r = add %v, %w", "ret %r"]


def test_run_sequence_identity(programs):
    m = programs["fib-iter"]
    out, flags = run_sequence(m, [])
    assert out is m and flags == []


def test_constant_chain_needs_several_phases():
    m = module("func @main() {\nb:\n  %a = const 2\n  %b = add %a, 3\n  %c = mul %b, %a\n"
               "  %d = sub %c, 1\n  print %d\n  ret %d\n}")
    seq = ["constprop", "constfold", "dce"]
    chained = run_sequence(m, seq)[0]
    for p in seq:
        assert chained.instr_count() < apply_phase(m, p).module.instr_count()
    assert observables(chained) == observables(m)


def test_run_sequence_deterministic(programs):
    seq = ["inline", "constprop", "loopunroll", "cse", "dce", "simplifycfg"]
    a, fa = run_sequence(programs["gcd-loop"], seq)
    b, fb = run_sequence(programs["gcd-loop"], seq)
    assert print_module(a) == print_module(b) and fa == fb and len(fa) == len(seq)


def test_order_sensitivity(corpus):
    seq = ["inline", "constprop", "constfold", "dce"]
    better = [pid for pid, m in corpus
              if run_sequence(m, seq)[0].instr_count() < run_sequence(m, seq[::-1])[0].instr_count()]
    assert better


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 14), st.lists(st.integers(0, 11), max_size=32))
def test_semantics_and_flags(corpus, prog, seq):
    _, m = corpus[prog]
    expected = observables(m)
    cur = m
    for idx in seq:
        res = apply_phase(cur, idx, verify=True)
        assert res.changed == (not structurally_equal(cur, res.module))
        cur = res.module
    assert observables(cur) == expected


@pytest.mark.parametrize("phase", ["dce", "simplifycfg", "jumpthread", "deadstore"])
def test_idempotent(corpus, phase):
    rng = np.random.default_rng(7)
    for _, m in corpus:
        for _ in range(5):
            seq = [PHASE_NAMES[i] for i in rng.integers(0, 12, size=rng.integers(0, 10))]
            start = run_sequence(m, seq)[0]
            once = apply_phase(start, phase).module
            assert not apply_phase(once, phase).changed
