"""``mlcomp`` command line: extract, features, train-pe, train-pss, optimize, eval.

Every flag can also be given in a ``--config`` key/value file, using the flag
name with dashes turned into underscores.  Flags override the file, the file
overrides ``MLCOMP_SEED``, which overrides built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .costmodel import PlatformError, bundled_platform, load_platform
from .dataset import (DatasetError, bundled_corpus, extract_dataset, load_corpus, read_dataset,
                      write_dataset)
from .features import extract_features, feature_manifest, FEATURE_NAMES
from .interp import DEFAULT_FUEL, TrapError
from .kvfile import KeyValueError, read_kv, to_bool
from .passes import UnknownPhaseError, parse_phase_list, run_sequence
from .pe import PeError, load_pe, model_search, save_pe, search_config_from_kv
from .pss import (PolicyError, TrainingError, load_policy, optimize_program, save_policy,
                  train_config_from_kv, train_policy)
from .report import emit_report, evaluate_policy
from .tir import TirError, parse_module, print_module, verify_module

log = logging.getLogger("mlcomp")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _settings(args, defaults: dict) -> dict:
    """Merge defaults, MLCOMP_SEED, the config file and explicit flags."""
    merged = {k: str(v) for k, v in defaults.items() if v is not None}
    env_seed = os.environ.get("MLCOMP_SEED")
    if env_seed is not None:
        merged["seed"] = env_seed
    if args.config:
        for k, v in read_kv(args.config).items():
            merged[k.replace("-", "_")] = v
    for k, v in vars(args).items():
        if k in ("command", "config", "func") or v is None or v is False:
            continue
        merged[k] = ",".join(map(str, v)) if isinstance(v, list) else str(v)
    return merged


def _need(s: dict, key: str) -> str:
    if key not in s or s[key] == "":
        raise UsageError(f"missing required setting --{key.replace('_', '-')} "
                         f"(or '{key}' in the config file)")
    return s[key]


def _int(s: dict, key: str) -> int:
    try:
        return int(s[key])
    except ValueError:
        raise UsageError(f"--{key.replace('_', '-')} must be an integer, got {s[key]!r}") from None


def _platform(where: str):
    """A platform file path, or the name of a bundled platform."""
    if Path(where).is_file():
        return load_platform(where)
    return bundled_platform(where)


def _corpus(where: str | None):
    if where is None or where == "bundled":
        return bundled_corpus()
    return load_corpus([where])


def cmd_extract(args) -> int:
    s = _settings(args, {"platform": "ember", "per_program": 20, "max_len": 32, "seed": 0,
                         "fuel": DEFAULT_FUEL, "workers": 1})
    out = _need(s, "out")
    d = extract_dataset(_corpus(s.get("corpus")), _platform(s["platform"]), _int(s, "per_program"),
                        max_len=_int(s, "max_len"), seed=_int(s, "seed"), fuel=_int(s, "fuel"),
                        workers=_int(s, "workers"))
    write_dataset(d, out)
    log.info("wrote %d samples to %s (%d dropped)", len(d), out, d.metadata["dropped"])
    return EXIT_OK


def cmd_features(args) -> int:
    s = _settings(args, {"out": "csv"})
    if to_bool(s.get("manifest", "false")):
        rows = [("index", "name", "description")] + [tuple(r) for r in feature_manifest()]
        csv.writer(sys.stdout, lineterminator="\n").writerows(rows)
        return EXIT_OK
    if s["out"] not in ("csv", "json"):
        raise UsageError(f"features: --out must be csv or json, got {s['out']!r}")
    m = parse_module(Path(_need(s, "file")).read_text(encoding="utf-8"))
    verify_module(m)
    fv = extract_features(m)
    if s["out"] == "json":
        json.dump({"manifest_version": fv.manifest_version, "features": fv.as_dict()},
                  sys.stdout, indent=1)
        sys.stdout.write("\n")
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(("index", "name", "value"))
        for i, (name, v) in enumerate(zip(FEATURE_NAMES, fv.values)):
            w.writerow((i, name, repr(v)))
    return EXIT_OK


def cmd_train_pe(args) -> int:
    s = _settings(args, {"seed": 0})
    d = read_dataset(_need(s, "dataset"))
    platform = _platform(s.get("platform", d.platform))
    cfg = search_config_from_kv(s)
    b = model_search(d, cfg, platform)
    save_pe(b, _need(s, "out"))
    log.info("winner %s/%s accuracy %.4f", b.winner["preprocessor"], b.winner["regressor"],
             b.accuracy)
    return EXIT_OK


def cmd_train_pss(args) -> int:
    s = _settings(args, {"seed": 0})
    pe = load_pe(_need(s, "pe"))
    out = _need(s, "out")
    cfg = train_config_from_kv(s)

    def progress(i, n, batch):
        if i % 10 == 0 or i == n:
            log.info("update %d/%d, mean return %.4f", i, n,
                     sum(ep.returns[0] for ep in batch if len(ep)) / max(1, len(batch)))

    policy = train_policy(_corpus(s.get("corpus")), pe, cfg, progress=progress)
    save_policy(policy, out)
    return EXIT_OK


def cmd_optimize(args) -> int:
    s = _settings(args, {"max_len": 128, "max_inactive": 8})
    src = Path(_need(s, "program"))
    m = parse_module(src.read_text(encoding="utf-8"))
    verify_module(m)
    if "phases" in s:
        # an explicit sequence replaces the policy
        try:
            seq = parse_phase_list(s["phases"])
        except UnknownPhaseError as exc:
            raise UsageError(f"--phases: {exc}") from None
        out, flags = run_sequence(m, seq, verify=True)
        applied = [str(p) for p, c in zip(seq, flags) if c]
        rep = {"applied_sequence": applied, "changed_count": len(applied),
               "attempt_count": len(seq), "terminal_reason": "explicit",
               "attempts": [{"phase": str(p), "rank": None, "changed": c}
                            for p, c in zip(seq, flags)]}
    else:
        policy = load_policy(_need(s, "policy"))
        out, applied, report = optimize_program(m, policy, _int(s, "max_len"),
                                                _int(s, "max_inactive"))
        rep = report.to_dict()
    text = print_module(out)
    if "emit" in s:
        Path(s["emit"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if "report" in s:
        doc = {"program": src.stem, **rep}
        with open(s["report"], "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
    log.info("applied %d phases: %s", len(applied), ",".join(applied))
    return EXIT_OK


def cmd_eval(args) -> int:
    s = _settings(args, {"platform": "ember", "k_random": 30, "seed": 0, "fuel": DEFAULT_FUEL,
                         "max_len": 128, "max_inactive": 8})
    policy = load_policy(_need(s, "policy"))
    if "csv" not in s and "json" not in s:
        raise UsageError("eval: give --csv and/or --json")
    platform = _platform(s["platform"])
    rows, summary = evaluate_policy(_corpus(s.get("corpus")), policy, platform,
                                    _int(s, "k_random"), _int(s, "seed"), _int(s, "fuel"),
                                    _int(s, "max_len"), _int(s, "max_inactive"))
    meta = {"platform": platform.name, "seed": _int(s, "seed"), "k_random": _int(s, "k_random"),
            "version": __version__}
    emit_report(rows, s.get("csv"), s.get("json"), summary, meta)
    g = summary["geomean"]["policy"]
    log.info("policy geomean relative time %.4f energy %.4f size %.4f",
             g["rel_time"], g["rel_energy"], g["rel_size"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mlcomp", description="Learned phase ordering for the TIR toy compiler.")
    p.add_argument("--version", action="version", version=f"mlcomp {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def command(name, func, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--config", help="key/value file holding any of this command's settings")
        sp.set_defaults(func=func)
        return sp

    sp = command("extract", cmd_extract, "profile random phase sequences into a dataset")
    sp.add_argument("--corpus", help="directory of .tir files (default: bundled corpus)")
    sp.add_argument("--platform", help="platform file or bundled name (default: ember)")
    sp.add_argument("--per-program", type=int)
    sp.add_argument("--max-len", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--fuel", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--out")

    sp = command("features", cmd_features, "print the static features of a program")
    sp.add_argument("file", nargs="?")
    sp.add_argument("--manifest", action="store_true", help="print the feature manifest instead")
    sp.add_argument("--out", choices=("csv", "json"), help="output format (default: csv)")

    sp = command("train-pe", cmd_train_pe, "search for a performance estimator")
    sp.add_argument("--dataset")
    sp.add_argument("--platform", help="platform file or bundled name (default: the dataset's)")
    sp.add_argument("--accuracy-thr", type=float)
    sp.add_argument("--models", help="comma list of preprocessor:regressor pairs")
    sp.add_argument("--trials-per-pair", type=int)
    sp.add_argument("--split-fraction", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")

    sp = command("train-pss", cmd_train_pss, "train the phase-selection policy")
    sp.add_argument("--corpus")
    sp.add_argument("--pe")
    sp.add_argument("--episodes", type=int)
    sp.add_argument("--batch", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--max-len", type=int)
    sp.add_argument("--max-inactive", type=int)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--weights", help="time,energy,size weights summing to 1")
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")

    sp = command("optimize", cmd_optimize, "optimize one program with a trained policy")
    sp.add_argument("--program")
    sp.add_argument("--policy")
    sp.add_argument("--phases", help="comma list of phases to apply instead of a policy")
    sp.add_argument("--emit", help="output .tir file (default: stdout)")
    sp.add_argument("--report", help="JSON file describing the applied phases")
    sp.add_argument("--max-len", type=int)
    sp.add_argument("--max-inactive", type=int)

    sp = command("eval", cmd_eval, "compare the policy against baselines by profiling")
    sp.add_argument("--corpus")
    sp.add_argument("--policy")
    sp.add_argument("--platform")
    sp.add_argument("--k-random", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--fuel", type=int)
    sp.add_argument("--max-len", type=int)
    sp.add_argument("--max-inactive", type=int)
    sp.add_argument("--csv")
    sp.add_argument("--json")
    return p


RUNTIME_ERRORS = (OSError, TirError, TrapError, DatasetError, PeError, PolicyError, TrainingError,
                  PlatformError, KeyValueError, UnknownPhaseError, ValueError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("mlcomp: choose a subcommand (see --help)")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        del args.verbose
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
