"""Column scalers and PCA with automatic dimension selection."""

from __future__ import annotations

import logging
import math

import numpy as np

log = logging.getLogger(__name__)

PREPROCESSORS = ("mean-std", "min-max", "max-abs", "robust", "pca")

# eigenvalues below this fraction of the largest are treated as exact zeros
_EIG_RTOL = 1e-10
VARIANCE_FALLBACK = 0.95


class NotFittedError(RuntimeError):
    pass


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    return X


class Preprocessor:
    kind = ""

    def __init__(self, **params):
        self.params = params
        self.n_features: int | None = None

    def _check(self, X) -> np.ndarray:
        if self.n_features is None:
            raise NotFittedError(f"{self.kind} preprocessor used before fit")
        X = _as_matrix(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"{self.kind}: expected {self.n_features} columns, got {X.shape[1]}")
        return X

    @property
    def n_outputs(self) -> int:
        raise NotImplementedError

    def fit(self, X) -> "Preprocessor":
        raise NotImplementedError

    def transform(self, X) -> np.ndarray:
        raise NotImplementedError

    def inverse_transform(self, Z) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class Scaler(Preprocessor):
    """``z = (x - center) / scale`` per column; constant columns map to 0."""

    def __init__(self, kind: str):
        super().__init__()
        self.kind = kind
        self.center: np.ndarray | None = None
        self.scale: np.ndarray | None = None

    @property
    def n_outputs(self) -> int:
        return self.n_features

    def fit(self, X) -> "Scaler":
        X = _as_matrix(X)
        if X.shape[0] < 2:
            raise ValueError("need at least 2 samples to fit a preprocessor")
        constant = np.ptp(X, axis=0) == 0
        if self.kind == "mean-std":
            center, scale = X.mean(axis=0), X.std(axis=0)
        elif self.kind == "min-max":
            center, scale = X.min(axis=0), np.ptp(X, axis=0)
        elif self.kind == "max-abs":
            center, scale = np.zeros(X.shape[1]), np.abs(X).max(axis=0)
        elif self.kind == "robust":
            q1, center, q3 = np.percentile(X, [25, 50, 75], axis=0)
            scale = q3 - q1
        else:
            raise ValueError(f"unknown scaler {self.kind!r}")
        center = np.where(constant, X[0], center)
        scale = np.where(constant | (scale == 0), 1.0, scale)
        self.center, self.scale = center, scale
        self.n_features = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        X = self._check(X)
        return (X - self.center) / self.scale

    def inverse_transform(self, Z) -> np.ndarray:
        if self.n_features is None:
            raise NotFittedError(f"{self.kind} preprocessor used before fit")
        Z = _as_matrix(Z)
        return Z * self.scale + self.center

    def to_dict(self) -> dict:
        return {"kind": self.kind, "center": self.center.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        s = cls(d["kind"])
        s.center = np.array(d["center"], dtype=float)
        s.scale = np.array(d["scale"], dtype=float)
        s.n_features = len(s.center)
        return s


def assess_dimension(spectrum: np.ndarray, rank: int, n_samples: int) -> float:
    """Minka's log-evidence of a rank-``rank`` probabilistic PCA model."""
    p = len(spectrum)
    if not 1 <= rank < p:
        raise ValueError("rank must lie in [1, n_features - 1]")
    eps = 1e-15
    if spectrum[rank - 1] < eps:
        return -math.inf
    pu = -rank * math.log(2.0)
    for i in range(1, rank + 1):
        pu += math.lgamma((p - i + 1) / 2.0) - math.log(math.pi) * (p - i + 1) / 2.0
    pl = -np.sum(np.log(spectrum[:rank])) * n_samples / 2.0
    v = max(eps, float(np.sum(spectrum[rank:])) / (p - rank))
    pv = -math.log(v) * n_samples * (p - rank) / 2.0
    m = p * rank - rank * (rank + 1.0) / 2.0
    pp = math.log(2.0 * math.pi) * (m + rank) / 2.0
    filled = spectrum.copy()
    filled[rank:] = v
    pa = 0.0
    for i in range(rank):
        for j in range(i + 1, p):
            gap = (spectrum[i] - spectrum[j]) * (1.0 / filled[j] - 1.0 / filled[i])
            if gap <= 0:
                return math.nan
            pa += math.log(gap) + math.log(n_samples)
    return float(pu + pl + pv + pp - pa / 2.0 - rank * math.log(n_samples) / 2.0)


def _unimodal(values: list[float]) -> bool:
    i = 0
    while i + 1 < len(values) and values[i + 1] >= values[i]:
        i += 1
    while i + 1 < len(values) and values[i + 1] <= values[i]:
        i += 1
    return i == len(values) - 1


def mle_dimension(spectrum: np.ndarray, n_samples: int) -> tuple[int, str, list[float]]:
    """Pick a PCA dimension from a descending eigenvalue spectrum.

    Returns ``(d, rule, profile)`` where ``rule`` is ``"mle"`` or, when the
    evidence profile is degenerate or has several local maxima, ``"variance"``
    (smallest d explaining 95% of the variance).
    """
    spectrum = np.asarray(spectrum, dtype=float)
    p = len(spectrum)
    if p == 0:
        return 0, "empty", []
    if p == 1:
        return 1, "single", []
    profile = [assess_dimension(spectrum, r, n_samples) for r in range(1, p)]
    finite = [(r + 1, v) for r, v in enumerate(profile) if math.isfinite(v)]
    degenerate = not finite or any(math.isnan(v) or v == math.inf for v in profile)
    if not degenerate:
        ranks, values = zip(*finite)
        contiguous = list(ranks) == list(range(1, len(ranks) + 1))
        if contiguous and _unimodal(list(values)):
            best = max(range(len(values)), key=lambda k: (values[k], -k))
            return ranks[best], "mle", profile
    total = float(spectrum.sum())
    if total <= 0:
        return 1, "variance", profile
    share = np.cumsum(spectrum) / total
    d = int(np.searchsorted(share, VARIANCE_FALLBACK - 1e-12) + 1)
    return min(d, p), "variance", profile


class PCA(Preprocessor):
    """PCA over non-constant columns.

    ``n_components=None`` selects the dimension by Minka's MLE (with a
    variance-share fallback).  ``standardize`` z-scores columns first and
    ``whiten`` rescales each component to unit variance.
    """

    kind = "pca"

    def __init__(self, n_components: int | None = None, standardize: bool = False,
                 whiten: bool = False):
        super().__init__(n_components=n_components, standardize=standardize, whiten=whiten)
        self.keep: np.ndarray | None = None
        self.fill: np.ndarray | None = None
        self.mean: np.ndarray | None = None
        self.col_scale: np.ndarray | None = None
        self.components: np.ndarray | None = None  # d x kept
        self.explained_variance: np.ndarray | None = None
        self.rule = ""

    @property
    def n_outputs(self) -> int:
        return 0 if self.components is None else self.components.shape[0]

    def fit(self, X) -> "PCA":
        X = _as_matrix(X)
        n = X.shape[0]
        if n < 2:
            raise ValueError("need at least 2 samples to fit a preprocessor")
        self.n_features = X.shape[1]
        self.keep = np.ptp(X, axis=0) > 0
        self.fill = X[0].copy()
        Xk = X[:, self.keep]
        self.mean = Xk.mean(axis=0)
        self.col_scale = Xk.std(axis=0) if self.params["standardize"] else np.ones(Xk.shape[1])
        Z = (Xk - self.mean) / self.col_scale
        k = Z.shape[1]
        if k == 0:
            self.components = np.zeros((0, 0))
            self.explained_variance = np.zeros(0)
            self.rule = "constant"
            return self
        cov = Z.T @ Z / (n - 1)
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1]
        evals = evals[order]
        evecs = evecs[:, order]
        evals = np.where(evals < _EIG_RTOL * max(evals[0], 0.0), 0.0, evals)
        # deterministic sign: largest-magnitude loading positive
        signs = np.sign(evecs[np.argmax(np.abs(evecs), axis=0), np.arange(k)])
        evecs = evecs * np.where(signs == 0, 1.0, signs)
        want = self.params["n_components"]
        if want is None:
            d, self.rule, _ = mle_dimension(evals, n)
            log.debug("pca dimension %d chosen by %s rule", d, self.rule)
        else:
            d, self.rule = max(0, min(int(want), k)), "fixed"
        self.components = evecs[:, :d].T.copy()
        self.explained_variance = evals[:d].copy()
        return self

    def _whiten_scale(self) -> np.ndarray:
        if not self.params["whiten"]:
            return np.ones(self.n_outputs)
        ev = self.explained_variance
        return np.sqrt(np.where(ev > 0, ev, 1.0))

    def transform(self, X) -> np.ndarray:
        X = self._check(X)
        Z = (X[:, self.keep] - self.mean) / self.col_scale
        return (Z @ self.components.T) / self._whiten_scale()

    def inverse_transform(self, Y) -> np.ndarray:
        if self.n_features is None:
            raise NotFittedError("pca preprocessor used before fit")
        Y = _as_matrix(Y)
        Z = (Y * self._whiten_scale()) @ self.components
        out = np.tile(self.fill, (Y.shape[0], 1))
        out[:, self.keep] = Z * self.col_scale + self.mean
        return out

    def to_dict(self) -> dict:
        return {
            "kind": "pca", "params": dict(self.params), "rule": self.rule,
            "n_features": self.n_features, "keep": self.keep.astype(int).tolist(),
            "fill": self.fill.tolist(), "mean": self.mean.tolist(),
            "col_scale": self.col_scale.tolist(), "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PCA":
        p = cls(**d["params"])
        p.n_features = d["n_features"]
        p.rule = d["rule"]
        p.keep = np.array(d["keep"], dtype=bool)
        p.fill = np.array(d["fill"], dtype=float)
        p.mean = np.array(d["mean"], dtype=float)
        p.col_scale = np.array(d["col_scale"], dtype=float)
        k = int(p.keep.sum())
        p.explained_variance = np.array(d["explained_variance"], dtype=float)
        p.components = np.array(d["components"], dtype=float).reshape(len(p.explained_variance), k)
        return p


def make_preprocessor(kind: str, **params) -> Preprocessor:
    if kind == "pca":
        return PCA(**params)
    if kind in PREPROCESSORS:
        if params:
            raise ValueError(f"{kind} takes no hyperparameters")
        return Scaler(kind)
    raise ValueError(f"unknown preprocessor {kind!r}; choose from {', '.join(PREPROCESSORS)}")


def fit_preprocessor(kind: str, X, **params) -> Preprocessor:
    return make_preprocessor(kind, **params).fit(X)


def preprocessor_from_dict(d: dict) -> Preprocessor:
    return PCA.from_dict(d) if d["kind"] == "pca" else Scaler.from_dict(d)
