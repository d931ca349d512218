"""Small builders shared by several test modules."""

from fractions import Fraction

from mlcomp.costmodel import PlatformModel
from mlcomp.tir import KINDS, parse_module

SMALLEST = "func @main(){ bb0: %r = const 7  ret %r }"

DIAMOND = """
func @main() {
entry:
  %c = const 1
  br %c, left, right
left:
  %x = const 2
  jmp exit
right:
  %x = const 3
  jmp exit
exit:
  ret %x
}
"""

NESTED = """
func @main() {
entry:
  %i = const 0
  %s = const 0
  jmp outer
outer:
  %c = lt %i, 3
  br %c, init, done
init:
  %j = const 0
  jmp inner
inner:
  %d = lt %j, 4
  br %d, ibody, onext
ibody:
  %s = add %s, %j
  %j = add %j, 1
  jmp inner
onext:
  %i = add %i, 1
  jmp outer
done:
  print %s
  ret %s
}
"""


def module(text: str):
    return parse_module(text)


def uniform_platform(cycles=1, energy=1, size=4, clock=10**6, static=0, name="flat") -> PlatformModel:
    return PlatformModel(name, {k: cycles for k in KINDS}, {k: Fraction(energy) for k in KINDS},
                         {k: size for k in KINDS}, clock, Fraction(static))


def linear_platform(base: PlatformModel) -> PlatformModel:
    """``base`` with no static power and energy proportional to cycles.

    Every dynamic metric is then a fixed linear function of the dynamic kind
    counts and average power is a constant, so straight-line programs have
    dynamics that are exactly linear in the static counts.
    """
    return base.replace(name=base.name + "-linear", static_power_mw=Fraction(0),
                        energy_per_kind={k: Fraction(3 * c, 2) for k, c in base.cycles_per_kind.items()})


LINEAR_SUBSET = ("polyeval", "bitmix", "fixmath", "crcstep")
