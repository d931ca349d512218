"""Platform cost tables and ground-truth profiling.

Totals are accumulated with :class:`fractions.Fraction` and rounded to float
once, so ``avg_power_w * exec_time_s == energy_j`` holds to the last ulp.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .interp import DEFAULT_FUEL, ExecOutcome, interpret
from .kvfile import KeyValueError, parse_kv
from .tir.ir import KIND_INDEX, KINDS, Module

METRICS = ("exec_time_s", "energy_j", "executed_instructions", "avg_power_w", "code_size_bytes")
NANO = Fraction(1, 10**9)
MILLI = Fraction(1, 10**3)


class PlatformError(ValueError):
    pass


@dataclass(frozen=True)
class PlatformModel:
    name: str
    cycles_per_kind: dict[str, int]
    energy_per_kind: dict[str, Fraction]  # nanojoules
    bytes_per_kind: dict[str, int]
    clock_hz: int
    static_power_mw: Fraction

    def __post_init__(self):
        for table, label in ((self.cycles_per_kind, "cycles"), (self.energy_per_kind, "energy_nj"),
                             (self.bytes_per_kind, "bytes")):
            for kind in KINDS:
                if kind not in table:
                    raise PlatformError(f"platform {self.name!r}: missing {label}.{kind} entry for {kind}")
                if table[kind] < 0:
                    raise PlatformError(f"platform {self.name!r}: negative {label}.{kind}")
        for kind in KINDS:
            if self.bytes_per_kind[kind] <= 0:
                raise PlatformError(f"platform {self.name!r}: bytes.{kind} must be positive")
        if self.clock_hz <= 0:
            raise PlatformError(f"platform {self.name!r}: clock_hz must be positive")
        if self.static_power_mw < 0:
            raise PlatformError(f"platform {self.name!r}: static_power_mw must be non-negative")

    def to_text(self) -> str:
        lines = [f"name = {self.name}", f"clock_hz = {self.clock_hz}",
                 f"static_power_mw = {_fmt(self.static_power_mw)}"]
        for kind in KINDS:
            lines.append(f"cycles.{kind} = {self.cycles_per_kind[kind]}")
            lines.append(f"energy_nj.{kind} = {_fmt(self.energy_per_kind[kind])}")
            lines.append(f"bytes.{kind} = {self.bytes_per_kind[kind]}")
        return "\n".join(lines) + "\n"

    def replace(self, **changes) -> "PlatformModel":
        fields = dict(name=self.name, cycles_per_kind=self.cycles_per_kind,
                      energy_per_kind=self.energy_per_kind, bytes_per_kind=self.bytes_per_kind,
                      clock_hz=self.clock_hz, static_power_mw=self.static_power_mw)
        fields.update(changes)
        return PlatformModel(**fields)


def _fmt(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    # exact decimal when the denominator is 2^a 5^b, else a ratio
    d = x.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    if d != 1:
        return f"{x.numerator}/{x.denominator}"
    digits = 0
    while (x * 10**digits).denominator != 1:
        digits += 1
    n = x * 10**digits
    s = str(abs(n.numerator)).rjust(digits + 1, "0")
    sign = "-" if x < 0 else ""
    return f"{sign}{s[:-digits]}.{s[-digits:]}"


def _number(value: str, key: str, source: str) -> Fraction:
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise PlatformError(f"{source}: {key} is not a number: {value!r}") from None


def parse_platform(text: str, source: str = "<string>") -> PlatformModel:
    try:
        kv = parse_kv(text, source)
    except KeyValueError as exc:
        raise PlatformError(str(exc)) from None
    if "name" not in kv:
        raise PlatformError(f"{source}: missing name")
    if "clock_hz" not in kv:
        raise PlatformError(f"{source}: missing clock_hz")
    clock = _number(kv["clock_hz"], "clock_hz", source)
    if clock.denominator != 1 or clock <= 0:
        raise PlatformError(f"{source}: clock_hz must be a positive integer")
    static = _number(kv.get("static_power_mw", "0"), "static_power_mw", source)
    tables: dict[str, dict] = {"cycles": {}, "energy_nj": {}, "bytes": {}}
    for key, value in kv.items():
        if "." not in key:
            if key not in ("name", "clock_hz", "static_power_mw"):
                raise PlatformError(f"{source}: unknown key {key!r}")
            continue
        table, kind = key.split(".", 1)
        if table not in tables or kind not in KIND_INDEX:
            raise PlatformError(f"{source}: unknown key {key!r}")
        num = _number(value, key, source)
        if table != "energy_nj":
            if num.denominator != 1:
                raise PlatformError(f"{source}: {key} must be an integer")
            num = int(num)
        tables[table][kind] = num
    for table in tables:
        for kind in KINDS:
            if kind not in tables[table]:
                raise PlatformError(f"{source}: missing {table}.{kind} entry for {kind}")
    return PlatformModel(kv["name"], tables["cycles"], tables["energy_nj"], tables["bytes"],
                         int(clock), static)


def load_platform(path) -> PlatformModel:
    """Load a platform file; a bare name such as ``ember`` selects a bundled platform."""
    p = Path(path)
    if not p.exists() and p.suffix == "" and p.name == str(path):
        return bundled_platform(str(path))
    return parse_platform(p.read_text(encoding="utf-8"), str(p))


def bundled_platform(name: str) -> PlatformModel:
    res = resources.files("mlcomp.data").joinpath("platforms", f"{name}.platform")
    if not res.is_file():
        raise PlatformError(f"no bundled platform named {name!r}")
    return parse_platform(res.read_text(encoding="utf-8"), f"{name}.platform")


@dataclass(frozen=True)
class DynamicFeatures:
    exec_time_s: float
    energy_j: float
    executed_instructions: int
    avg_power_w: float
    code_size_bytes: int

    def as_dict(self) -> dict[str, float | int]:
        return {m: getattr(self, m) for m in METRICS}

    @classmethod
    def from_dict(cls, d) -> "DynamicFeatures":
        return cls(float(d["exec_time_s"]), float(d["energy_j"]), int(d["executed_instructions"]),
                   float(d["avg_power_w"]), int(d["code_size_bytes"]))


def static_counts(m: Module) -> list[int]:
    counts = [0] * len(KINDS)
    for fn in m.functions:
        for b in fn.blocks:
            for ins in b.instrs:
                counts[KIND_INDEX[ins.kind]] += 1
    return counts


def code_size(m: Module, platform: PlatformModel) -> int:
    return sum(c * platform.bytes_per_kind[k] for k, c in zip(KINDS, static_counts(m)))


def total_cycles(outcome: ExecOutcome, platform: PlatformModel) -> int:
    return sum(c * platform.cycles_per_kind[k] for k, c in zip(KINDS, outcome.counts))


def dynamics_from_counts(counts, size_bytes: int, platform: PlatformModel) -> DynamicFeatures:
    cycles = sum(c * platform.cycles_per_kind[k] for k, c in zip(KINDS, counts))
    dyn_nj = sum(c * platform.energy_per_kind[k] for k, c in zip(KINDS, counts))
    time = Fraction(cycles, platform.clock_hz)
    energy = dyn_nj * NANO + platform.static_power_mw * MILLI * time
    power = energy / time if time > 0 else Fraction(0)
    return DynamicFeatures(float(time), float(energy), int(sum(counts)), float(power), size_bytes)


def profile(m: Module, platform: PlatformModel, fuel: int = DEFAULT_FUEL) -> DynamicFeatures:
    """Execute ``m`` and price the run on ``platform``; traps propagate."""
    outcome = interpret(m, fuel)
    return dynamics_from_counts(outcome.counts, code_size(m, platform), platform)
