"""Performance estimator: model search over preprocessor/regressor pairs.

The estimator input is the 63 static features followed by the 22 static
per-kind instruction counts (85 columns).  One regressor is fitted per
predicted metric, all sharing one preprocessor.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .costmodel import DynamicFeatures, PlatformModel, code_size, parse_platform, static_counts
from .dataset import Dataset
from .features import MANIFEST_VERSION, extract_features
from .kvfile import parse_kv, read_kv, to_list
from .mlkit import (
    PREPROCESSORS, REGRESSORS, make_preprocessor, make_regressor, preprocessor_from_dict,
    regression_metrics, regressor_from_dict,
)
from .tir.ir import KINDS, Module

log = logging.getLogger(__name__)

PE_METRICS = ("exec_time_s", "energy_j", "executed_instructions", "avg_power_w")
BUNDLE_FORMAT = "mlcomp-pe"
BUNDLE_VERSION = 1

# (low, high, scale) per hyperparameter; "int" draws inclusive integers
DEFAULT_RANGES: dict[str, dict[str, tuple]] = {
    "ridge": {"alpha": (1e-8, 1e2, "log")},
    "knn": {"k": (1, 8, "int")},
    "tree": {"max_depth": (3, 20, "int"), "min_leaf": (1, 5, "int")},
    "forest": {"n_trees": (10, 30, "int"), "max_depth": (4, 20, "int"),
               "feature_subsample": (0.3, 1.0, "linear")},
}
DEFAULT_MODELS: tuple[tuple[str, str], ...] = tuple(
    (prep, reg) for reg in REGRESSORS for prep in PREPROCESSORS
)


class PeError(ValueError):
    pass


@dataclass(frozen=True)
class PeSearchConfig:
    accuracy_thr: float = 0.98
    models: tuple[tuple[str, str], ...] = DEFAULT_MODELS
    trials_per_pair: int = 8
    split_fraction: float = 0.8
    seed: int = 0
    ranges: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_RANGES.items()})

    def __post_init__(self):
        if not 0 < self.split_fraction < 1:
            raise PeError("split_fraction must lie strictly between 0 and 1")
        if self.trials_per_pair < 1:
            raise PeError("trials_per_pair must be >= 1")
        if not self.models:
            raise PeError("model list is empty")
        for prep, reg in self.models:
            if prep not in PREPROCESSORS:
                raise PeError(f"unknown preprocessor {prep!r}")
            if reg not in REGRESSORS:
                raise PeError(f"unknown regressor {reg!r}")

    def to_dict(self) -> dict:
        return {
            "accuracy_thr": self.accuracy_thr,
            "models": [list(p) for p in self.models],
            "trials_per_pair": self.trials_per_pair,
            "split_fraction": self.split_fraction,
            "seed": self.seed,
            "ranges": {k: {h: list(v) for h, v in r.items()} for k, r in self.ranges.items()},
        }


def parse_search_config(text: str, source: str = "<string>", base: PeSearchConfig | None = None) -> PeSearchConfig:
    """Key/value form: ``accuracy_thr``, ``models = mean-std:ols, pca:knn``,
    ``trials_per_pair``, ``split_fraction``, ``seed`` and ranges such as
    ``knn.k = 1, 8``.  Unrelated keys are ignored so one run config can
    carry every stage's settings."""
    return search_config_from_kv(parse_kv(text, source), base)


def search_config_from_kv(kv: dict, base: PeSearchConfig | None = None) -> PeSearchConfig:
    cfg = base or PeSearchConfig()
    changes: dict = {}
    if "accuracy_thr" in kv:
        changes["accuracy_thr"] = float(kv["accuracy_thr"])
    if "models" in kv:
        pairs = []
        for item in to_list(kv["models"]):
            prep, sep, reg = item.partition(":")
            if not sep:
                raise PeError(f"model entry {item!r} must look like preprocessor:regressor")
            pairs.append((prep.strip(), reg.strip()))
        changes["models"] = tuple(pairs)
    if "trials_per_pair" in kv:
        changes["trials_per_pair"] = int(kv["trials_per_pair"])
    if "split_fraction" in kv:
        changes["split_fraction"] = float(kv["split_fraction"])
    if "pe_seed" in kv:
        changes["seed"] = int(kv["pe_seed"])
    elif "seed" in kv:
        changes["seed"] = int(kv["seed"])
    ranges = {k: dict(v) for k, v in cfg.ranges.items()}
    for key, value in kv.items():
        reg, _, hp = key.partition(".")
        if reg in DEFAULT_RANGES and hp in DEFAULT_RANGES[reg]:
            lo, hi = (float(x) for x in to_list(value))
            scale = DEFAULT_RANGES[reg][hp][2]
            if scale == "int":
                lo, hi = int(lo), int(hi)
            if lo > hi:
                raise PeError(f"{key}: empty range")
            ranges[reg][hp] = (lo, hi, scale)
    changes["ranges"] = ranges
    return replace(cfg, **changes)


def load_search_config(path, base: PeSearchConfig | None = None) -> PeSearchConfig:
    return search_config_from_kv(read_kv(path), base)


def pe_inputs(static_features, counts) -> np.ndarray:
    return np.concatenate([np.asarray(static_features, dtype=float), np.asarray(counts, dtype=float)])


def dataset_matrices(samples) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([pe_inputs(s.static_features, s.platform_instruction_counts) for s in samples])
    Y = np.array([[float(getattr(s.dynamics, m)) for m in PE_METRICS] for s in samples])
    return X.reshape(len(samples), -1), Y.reshape(len(samples), len(PE_METRICS))


def split_dataset(d: Dataset, fraction: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Shuffled split into ``ceil(fraction * n)`` training samples and the rest."""
    n = len(d.samples)
    if n < 5:
        raise PeError(f"dataset too small to split ({n} samples, need at least 5)")
    if not 0 < fraction < 1:
        raise PeError("split fraction must lie strictly between 0 and 1")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = min(n - 1, math.ceil(fraction * n))
    train = [d.samples[i] for i in sorted(perm[:n_train])]
    test = [d.samples[i] for i in sorted(perm[n_train:])]
    return (Dataset(train, d.platform, d.seed, d.manifest_version, dict(d.metadata)),
            Dataset(test, d.platform, d.seed, d.manifest_version, dict(d.metadata)))


def draw_hyperparams(reg: str, ranges: dict, rng: np.random.Generator) -> dict:
    params = {}
    for name, (lo, hi, scale) in ranges.get(reg, {}).items():
        if scale == "int":
            params[name] = int(rng.integers(lo, hi + 1))
        elif scale == "log":
            params[name] = float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
        else:
            params[name] = float(rng.uniform(lo, hi))
    if reg == "forest":
        params["seed"] = int(rng.integers(0, 2**31 - 1))
    return params


def _fit_models(prep: str, reg: str, params: dict, X: np.ndarray, Y: np.ndarray):
    pre = make_preprocessor(prep).fit(X)
    Z = pre.transform(X)
    models = {m: make_regressor(reg, **params).fit(Z, Y[:, j]) for j, m in enumerate(PE_METRICS)}
    return pre, models


def _score(pre, models, X, Y) -> dict:
    Z = pre.transform(X)
    return {m: regression_metrics(Y[:, j], np.maximum(models[m].predict(Z), 0.0))
            for j, m in enumerate(PE_METRICS)}


@dataclass
class PeBundle:
    platform_name: str
    platform_text: str
    preprocessor: object
    regressors: dict
    test_metrics: dict
    search_log: list
    winner: dict
    config: dict
    manifest_version: int = MANIFEST_VERSION

    @property
    def accuracy(self) -> float:
        return self.winner["accuracy"]

    def platform(self) -> PlatformModel:
        return parse_platform(self.platform_text, f"{self.platform_name} (embedded)")


def model_search(d: Dataset, cfg: PeSearchConfig, platform: PlatformModel) -> PeBundle:
    """Random search over the configured pairs, keeping the most accurate trial.

    Trials run pair by pair; trial ``t`` of pair ``i`` draws hyperparameters
    from the seed ``[seed, i, t]``.  The search stops as soon as the best
    accuracy exceeds ``accuracy_thr``.  The winner is refitted on every sample.
    """
    if d.manifest_version != MANIFEST_VERSION:
        raise PeError("dataset feature manifest version does not match")
    if platform.name != d.platform:
        raise PeError(f"dataset platform {d.platform!r} differs from {platform.name!r}")
    train, test = split_dataset(d, cfg.split_fraction, cfg.seed)
    Xtr, Ytr = dataset_matrices(train.samples)
    Xte, Yte = dataset_matrices(test.samples)
    search_log: list[dict] = []
    best = None
    stop = False
    for pi, (prep, reg) in enumerate(cfg.models):
        n_trials = cfg.trials_per_pair if cfg.ranges.get(reg) else 1
        for t in range(n_trials):
            params = draw_hyperparams(reg, cfg.ranges, np.random.default_rng([cfg.seed, pi, t]))
            entry = {"trial": len(search_log), "preprocessor": prep, "regressor": reg,
                     "params": params}
            try:
                pre, models = _fit_models(prep, reg, params, Xtr, Ytr)
                metrics = _score(pre, models, Xte, Yte)
                acc = 1.0 - float(np.mean([metrics[m].mape for m in PE_METRICS]))
                if not math.isfinite(acc):
                    raise FloatingPointError("non-finite accuracy")
                entry["accuracy"] = acc
                entry["metrics"] = {m: metrics[m].as_dict() for m in PE_METRICS}
            except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                log.warning("trial %d (%s, %s) failed: %s", len(search_log), prep, reg, exc)
                acc = -math.inf
                entry["accuracy"] = None
                entry["error"] = str(exc)
            search_log.append(entry)
            if best is None or acc > best[0]:
                best = (acc, entry)
            if best[0] > cfg.accuracy_thr:
                stop = True
                break
        if stop:
            break
    acc, entry = best
    if acc == -math.inf:
        raise PeError("every model-search trial failed")
    X, Y = dataset_matrices(d.samples)
    pre, models = _fit_models(entry["preprocessor"], entry["regressor"], entry["params"], X, Y)
    winner = {"trial": entry["trial"], "preprocessor": entry["preprocessor"],
              "regressor": entry["regressor"], "params": entry["params"], "accuracy": acc,
              "n_train": len(train.samples), "n_test": len(test.samples),
              "split_seed": cfg.seed, "split_fraction": cfg.split_fraction}
    return PeBundle(platform.name, platform.to_text(), pre, models, entry["metrics"], search_log,
                    winner, cfg.to_dict(), MANIFEST_VERSION)


def predict_matrix(b: PeBundle, X: np.ndarray) -> np.ndarray:
    """Raw estimates for rows of 85 PE inputs, clamped at 0; columns follow PE_METRICS."""
    Z = b.preprocessor.transform(np.atleast_2d(X))
    return np.column_stack([np.maximum(b.regressors[m].predict(Z), 0.0) for m in PE_METRICS])


def predict_dynamics(b: PeBundle, static_features, counts, code_size_bytes: int | None = None,
                     manifest_version: int = MANIFEST_VERSION) -> DynamicFeatures:
    """Estimated dynamics; code size is exact (from ``counts`` unless given)."""
    if manifest_version != b.manifest_version:
        raise PeError(f"feature manifest version {manifest_version} does not match the bundle's "
                      f"{b.manifest_version}")
    est = predict_matrix(b, pe_inputs(static_features, counts)[None, :])[0]
    if code_size_bytes is None:
        bytes_per = b.platform().bytes_per_kind
        code_size_bytes = sum(c * bytes_per[k] for k, c in zip(KINDS, counts))
    return DynamicFeatures(float(est[0]), float(est[1]), float(est[2]), float(est[3]),
                           int(code_size_bytes))


def estimate_module(b: PeBundle, m: Module, platform: PlatformModel | None = None) -> DynamicFeatures:
    platform = platform or b.platform()
    fv = extract_features(m)
    return predict_dynamics(b, fv.values, static_counts(m), code_size(m, platform), fv.manifest_version)


def bundle_to_dict(b: PeBundle) -> dict:
    return {
        "format": BUNDLE_FORMAT,
        "format_version": BUNDLE_VERSION,
        "manifest_version": b.manifest_version,
        "platform_name": b.platform_name,
        "platform": b.platform_text,
        "input": "63 static features followed by 22 static instruction counts",
        "metrics": list(PE_METRICS),
        "winner": b.winner,
        "test_metrics": b.test_metrics,
        "preprocessor": b.preprocessor.to_dict(),
        "regressors": {m: b.regressors[m].to_dict() for m in PE_METRICS},
        "config": b.config,
        "search_log": b.search_log,
    }


def bundle_from_dict(d: dict) -> PeBundle:
    if d.get("format") != BUNDLE_FORMAT:
        raise PeError("not a performance-estimator bundle")
    if d.get("format_version") != BUNDLE_VERSION:
        raise PeError(f"unsupported bundle version {d.get('format_version')}")
    if d.get("manifest_version") != MANIFEST_VERSION:
        raise PeError(f"bundle feature manifest version {d.get('manifest_version')} does not match "
                      f"current version {MANIFEST_VERSION}")
    missing = [m for m in PE_METRICS if m not in d.get("regressors", {})]
    if missing:
        raise PeError(f"bundle lacks regressors for {', '.join(missing)}")
    return PeBundle(
        d["platform_name"], d["platform"], preprocessor_from_dict(d["preprocessor"]),
        {m: regressor_from_dict(d["regressors"][m]) for m in PE_METRICS},
        d["test_metrics"], d["search_log"], d["winner"], d["config"], d["manifest_version"],
    )


def dumps_pe(b: PeBundle) -> str:
    return json.dumps(bundle_to_dict(b), indent=1, sort_keys=True) + "\n"


def save_pe(b: PeBundle, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_pe(b))


def load_pe(path) -> PeBundle:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PeError(f"{path}: corrupted bundle: {exc}") from None
    try:
        return bundle_from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, PeError):
            raise
        raise PeError(f"{path}: corrupted bundle: {exc!r}") from None
