"""Training-data extraction for the performance estimator.

Every (program, sequence) pair gets its own RNG stream seeded with
``[seed, program_index, sequence_index]``, so the result does not depend on
how the work is scheduled.
"""

from __future__ import annotations

import json
from importlib import resources
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .costmodel import DynamicFeatures, PlatformModel, dynamics_from_counts, code_size, static_counts
from .features import MANIFEST_VERSION, extract_features
from .interp import DEFAULT_FUEL, TrapError, interpret
from .passes import PHASE_NAMES, run_sequence
from .tir import Module, parse_module

FORMAT = "mlcomp-dataset"


class DatasetError(ValueError):
    pass


class DatasetVersionError(DatasetError):
    pass


@dataclass(frozen=True)
class Sample:
    program_id: str
    platform_name: str
    phase_sequence: tuple[str, ...]
    static_features: tuple[float, ...]
    platform_instruction_counts: tuple[int, ...]
    dynamics: DynamicFeatures

    def to_record(self) -> dict:
        return {
            "program_id": self.program_id,
            "platform_name": self.platform_name,
            "phase_sequence": list(self.phase_sequence),
            "static_features": list(self.static_features),
            "platform_instruction_counts": list(self.platform_instruction_counts),
            "dynamics": self.dynamics.as_dict(),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Sample":
        return cls(
            rec["program_id"],
            rec["platform_name"],
            tuple(rec["phase_sequence"]),
            tuple(float(v) for v in rec["static_features"]),
            tuple(int(v) for v in rec["platform_instruction_counts"]),
            DynamicFeatures.from_dict(rec["dynamics"]),
        )


@dataclass
class Dataset:
    samples: list[Sample]
    platform: str
    seed: int | None
    manifest_version: int = MANIFEST_VERSION
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)


def random_phase_sequence(rng_seed, max_len: int) -> list[str]:
    """Length uniform in ``[0, max_len]``, phases drawn uniformly with replacement."""
    if max_len < 0:
        raise ValueError("max_len must be non-negative")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    n = int(rng.integers(0, max_len + 1))
    return [PHASE_NAMES[i] for i in rng.integers(0, len(PHASE_NAMES), size=n)]


def load_corpus(paths) -> list[tuple[str, Module]]:
    """Parse ``.tir`` files (directories are expanded, sorted by name)."""
    files: list[Path] = []
    for p in paths:
        p = Path(p)
        files.extend(sorted(p.glob("*.tir")) if p.is_dir() else [p])
    if not files:
        raise DatasetError("corpus is empty")
    out = []
    for f in files:
        try:
            text = f.read_text(encoding="utf-8")
        except OSError as exc:
            raise DatasetError(f"cannot read corpus file {f}: {exc}") from None
        out.append((f.stem, parse_module(text)))
    return out


def bundled_corpus() -> list[tuple[str, Module]]:
    root = resources.files("mlcomp.data").joinpath("corpus")
    entries = sorted((e for e in root.iterdir() if e.name.endswith(".tir")), key=lambda e: e.name)
    return [(e.name[:-4], parse_module(e.read_text(encoding="utf-8"))) for e in entries]


def make_sample(program_id: str, m: Module, seq, platform: PlatformModel,
                fuel: int = DEFAULT_FUEL) -> Sample:
    """Compile ``m`` with ``seq`` and profile it; traps propagate."""
    out, _ = run_sequence(m, seq)
    outcome = interpret(out, fuel)
    dyn = dynamics_from_counts(outcome.counts, code_size(out, platform), platform)
    return Sample(program_id, platform.name, tuple(seq), extract_features(out).values,
                  tuple(static_counts(out)), dyn)


def _job(args):
    program_id, m, seq, platform, fuel = args
    try:
        return make_sample(program_id, m, seq, platform, fuel)
    except TrapError as exc:
        return type(exc).__name__


def extract_dataset(corpus, platform: PlatformModel, n_sequences_per_program: int,
                    max_len: int = 32, seed: int = 0, fuel: int = DEFAULT_FUEL,
                    workers: int = 1) -> Dataset:
    """``corpus`` holds ``(program_id, Module)`` pairs or paths to ``.tir`` files."""
    corpus = list(corpus)
    if not corpus:
        raise DatasetError("corpus is empty")
    if not isinstance(corpus[0], tuple):
        corpus = load_corpus(corpus)
    jobs = []
    for pi, (pid, m) in enumerate(corpus):
        for si in range(n_sequences_per_program):
            seq = random_phase_sequence([seed, pi, si], max_len)
            jobs.append((pid, m, seq, platform, fuel))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_job, jobs, chunksize=8))
    else:
        results = [_job(j) for j in jobs]
    samples = [r for r in results if isinstance(r, Sample)]
    dropped: dict[str, int] = {}
    for r in results:
        if isinstance(r, str):
            dropped[r] = dropped.get(r, 0) + 1
    meta = {
        "requested": len(jobs),
        "dropped": len(jobs) - len(samples),
        "dropped_by_trap": dropped,
        "programs": [pid for pid, _ in corpus],
        "per_program": n_sequences_per_program,
        "max_len": max_len,
        "fuel": fuel,
        "phases": list(PHASE_NAMES),
        "version": __version__,
    }
    return Dataset(samples, platform.name, seed, MANIFEST_VERSION, meta)


def write_dataset(d: Dataset, path) -> None:
    header = {"format": FORMAT, "manifest_version": d.manifest_version, "platform": d.platform,
              "seed": d.seed, "n_samples": len(d.samples), "metadata": d.metadata}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for s in d.samples:
            fh.write(json.dumps(s.to_record(), sort_keys=True) + "\n")


def read_dataset(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise DatasetError(f"{path}: empty dataset file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: bad header: {exc}") from None
    if header.get("format") != FORMAT:
        raise DatasetError(f"{path}: not a dataset file")
    if header.get("manifest_version") != MANIFEST_VERSION:
        raise DatasetVersionError(
            f"{path}: feature manifest version {header.get('manifest_version')} "
            f"does not match current version {MANIFEST_VERSION}"
        )
    samples = [Sample.from_record(json.loads(line)) for line in lines[1:]]
    if header.get("n_samples", len(samples)) != len(samples):
        raise DatasetError(f"{path}: header declares {header['n_samples']} samples, found {len(samples)}")
    return Dataset(samples, header["platform"], header.get("seed"), header["manifest_version"],
                   header.get("metadata", {}))


__all__ = ["Sample", "Dataset", "DatasetError", "DatasetVersionError", "random_phase_sequence",
           "load_corpus", "bundled_corpus", "make_sample", "extract_dataset", "write_dataset", "read_dataset"]
