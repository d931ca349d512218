"""Single-output regressors: linear, ridge, k-nearest neighbours, CART tree, random forest."""

from __future__ import annotations

import logging
import math

import numpy as np

log = logging.getLogger(__name__)

REGRESSORS = ("ols", "ridge", "knn", "tree", "forest")
OLS_FALLBACK_ALPHA = 1e-8


class Regressor:
    kind = ""

    def __init__(self, **params):
        self.params = params
        self.fitted = False

    def fit(self, X, y) -> "Regressor":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError(f"bad shapes X{X.shape} y{y.shape}")
        if X.shape[0] < 2:
            raise ValueError("need at least 2 samples to fit a regressor")
        self.n_features = X.shape[1]
        self._fit(X, y)
        self.fitted = True
        return self

    def predict(self, X) -> np.ndarray:
        if not self.fitted:
            raise RuntimeError(f"{self.kind} regressor used before fit")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"{self.kind}: expected {self.n_features} columns, got shape {X.shape}")
        return self._predict(X)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "n_features": self.n_features,
                "state": self._state()}

    def _fit(self, X, y): raise NotImplementedError
    def _predict(self, X): raise NotImplementedError
    def _state(self) -> dict: raise NotImplementedError
    def _load(self, state: dict): raise NotImplementedError


def _ridge_solve(Xc: np.ndarray, yc: np.ndarray, alpha: float) -> np.ndarray:
    p = Xc.shape[1]
    A = np.vstack([Xc, math.sqrt(alpha) * np.eye(p)])
    b = np.concatenate([yc, np.zeros(p)])
    return np.linalg.lstsq(A, b, rcond=None)[0]


class Linear(Regressor):
    """Least squares with intercept; ``ridge`` adds an L2 penalty ``alpha``."""

    def __init__(self, kind: str = "ols", alpha: float = 0.0):
        if kind == "ols":
            super().__init__()
        else:
            if alpha < 0:
                raise ValueError("ridge alpha must be non-negative")
            super().__init__(alpha=alpha)
        self.kind = kind
        self.fallback = False

    def _fit(self, X, y):
        xm, ym = X.mean(axis=0), y.mean()
        Xc, yc = X - xm, y - ym
        if self.kind == "ols":
            w, _, rank, _ = np.linalg.lstsq(Xc, yc, rcond=None)
            if rank < X.shape[1]:
                log.info("ols: rank %d < %d columns, falling back to ridge alpha=%g",
                         rank, X.shape[1], OLS_FALLBACK_ALPHA)
                self.fallback = True
                w = _ridge_solve(Xc, yc, OLS_FALLBACK_ALPHA)
        else:
            w = _ridge_solve(Xc, yc, self.params["alpha"])
        self.coef = w
        self.intercept = float(ym - xm @ w)

    def _predict(self, X):
        return X @ self.coef + self.intercept

    def _state(self):
        return {"coef": self.coef.tolist(), "intercept": self.intercept, "fallback": self.fallback}

    def _load(self, s):
        self.coef = np.array(s["coef"], dtype=float).reshape(self.n_features)
        self.intercept = float(s["intercept"])
        self.fallback = bool(s["fallback"])


class KNN(Regressor):
    """Mean of the k nearest training targets; ties keep training order."""

    kind = "knn"

    def __init__(self, k: int = 5):
        if k < 1:
            raise ValueError("knn k must be >= 1")
        super().__init__(k=int(k))

    def _fit(self, X, y):
        self.X, self.y = X.copy(), y.copy()

    def _predict(self, X):
        k = min(self.params["k"], len(self.y))
        d2 = ((X[:, None, :] - self.X[None, :, :]) ** 2).sum(axis=2)
        idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
        return self.y[idx].mean(axis=1)

    def _state(self):
        return {"X": self.X.tolist(), "y": self.y.tolist()}

    def _load(self, s):
        self.X = np.array(s["X"], dtype=float).reshape(-1, self.n_features)
        self.y = np.array(s["y"], dtype=float)


def best_split(X: np.ndarray, y: np.ndarray, features, min_leaf: int):
    """Best SSE-reducing split over ``features`` (ascending order).

    Maximizes ``S_l^2/n_l + S_r^2/n_r``; ties go to the lowest feature index,
    then the lowest threshold.  Returns ``(feature, threshold, score)`` or None.
    """
    n = len(y)
    if n < 2 * min_leaf:
        return None
    best = None
    sub = X[:, features]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = y[order]
    left_sum = np.cumsum(ys, axis=0)[:-1]
    total = ys.sum(axis=0)
    n_left = np.arange(1, n)[:, None]
    score = left_sum ** 2 / n_left + (total - left_sum) ** 2 / (n - n_left)
    valid = xs[:-1] < xs[1:]
    valid[: min_leaf - 1] = False
    valid[n - min_leaf:] = False
    score = np.where(valid, score, -np.inf)
    for col, f in enumerate(features):
        i = int(np.argmax(score[:, col]))
        s = score[i, col]
        if s == -np.inf:
            continue
        if best is None or s > best[2]:
            lo, hi = xs[i, col], xs[i + 1, col]
            thr = (lo + hi) / 2.0
            if not lo <= thr < hi:
                thr = lo
            best = (int(f), float(thr), float(s))
    return best


class _TreeBuilder:
    def __init__(self, max_depth: int, min_leaf: int, n_sub: int | None = None, rng=None):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.n_sub = n_sub
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.value) - 1

    def build(self, X, y):
        root = self._node()
        stack = [(root, np.arange(len(y)), 0)]
        p = X.shape[1]
        while stack:
            node, idx, depth = stack.pop()
            yy = y[idx]
            self.value[node] = float(yy.mean())
            if depth >= self.max_depth or len(idx) < 2 * self.min_leaf or np.ptp(yy) == 0:
                continue
            if self.n_sub is None or self.n_sub >= p:
                features = np.arange(p)
            else:
                features = np.sort(self.rng.choice(p, size=self.n_sub, replace=False))
            split = best_split(X[idx], yy, features, self.min_leaf)
            if split is None:
                continue
            f, thr, _ = split
            go_left = X[idx, f] <= thr
            left, right = self._node(), self._node()
            self.feature[node], self.threshold[node] = f, thr
            self.left[node], self.right[node] = left, right
            stack.append((right, idx[~go_left], depth + 1))
            stack.append((left, idx[go_left], depth + 1))
        return {
            "feature": self.feature, "threshold": self.threshold,
            "left": self.left, "right": self.right, "value": self.value,
        }


def _tree_predict(t: dict, X: np.ndarray) -> np.ndarray:
    feature = t["feature"]
    node = np.zeros(len(X), dtype=int)
    while True:
        f = feature[node]
        internal = f >= 0
        if not internal.any():
            return t["value"][node]
        rows = np.nonzero(internal)[0]
        nd = node[rows]
        go_left = X[rows, f[rows]] <= t["threshold"][nd]
        node[rows] = np.where(go_left, t["left"][nd], t["right"][nd])


def _tree_arrays(t: dict) -> dict:
    return {
        "feature": np.array(t["feature"], dtype=int), "threshold": np.array(t["threshold"], dtype=float),
        "left": np.array(t["left"], dtype=int), "right": np.array(t["right"], dtype=int),
        "value": np.array(t["value"], dtype=float),
    }


def _tree_lists(t: dict) -> dict:
    return {k: np.asarray(v).tolist() for k, v in t.items()}


class Tree(Regressor):
    """CART regression tree with squared-error splits at midpoints."""

    kind = "tree"

    def __init__(self, max_depth: int = 8, min_leaf: int = 1):
        if max_depth < 0 or min_leaf < 1:
            raise ValueError("tree needs max_depth >= 0 and min_leaf >= 1")
        super().__init__(max_depth=int(max_depth), min_leaf=int(min_leaf))

    def _fit(self, X, y):
        self.tree = _tree_arrays(_TreeBuilder(self.params["max_depth"], self.params["min_leaf"]).build(X, y))

    def _predict(self, X):
        return _tree_predict(self.tree, X)

    def _state(self):
        return {"tree": _tree_lists(self.tree)}

    def _load(self, s):
        self.tree = _tree_arrays(s["tree"])


class Forest(Regressor):
    """Average of trees grown with per-split feature subsampling.

    ``bootstrap`` resamples rows per tree; it is off by default so a
    one-tree forest using every feature is exactly a single tree.
    """

    kind = "forest"

    def __init__(self, n_trees: int = 20, max_depth: int = 8, feature_subsample: float = 1.0,
                 min_leaf: int = 1, bootstrap: bool = False, seed: int = 0):
        if n_trees < 1 or not 0 < feature_subsample <= 1:
            raise ValueError("forest needs n_trees >= 1 and 0 < feature_subsample <= 1")
        super().__init__(n_trees=int(n_trees), max_depth=int(max_depth),
                         feature_subsample=float(feature_subsample), min_leaf=int(min_leaf),
                         bootstrap=bool(bootstrap), seed=int(seed))

    def _fit(self, X, y):
        p = X.shape[1]
        n_sub = max(1, math.ceil(self.params["feature_subsample"] * p))
        rng = np.random.default_rng(self.params["seed"])
        self.trees = []
        for _ in range(self.params["n_trees"]):
            rows = np.arange(len(y))
            if self.params["bootstrap"]:
                rows = rng.integers(0, len(y), size=len(y))
            builder = _TreeBuilder(self.params["max_depth"], self.params["min_leaf"], n_sub, rng)
            self.trees.append(_tree_arrays(builder.build(X[rows], y[rows])))

    def _predict(self, X):
        return np.mean([_tree_predict(t, X) for t in self.trees], axis=0)

    def _state(self):
        return {"trees": [_tree_lists(t) for t in self.trees]}

    def _load(self, s):
        self.trees = [_tree_arrays(t) for t in s["trees"]]


def make_regressor(kind: str, **params) -> Regressor:
    if kind == "ols":
        if params:
            raise ValueError("ols takes no hyperparameters")
        return Linear("ols")
    if kind == "ridge":
        return Linear("ridge", **params)
    if kind == "knn":
        return KNN(**params)
    if kind == "tree":
        return Tree(**params)
    if kind == "forest":
        return Forest(**params)
    raise ValueError(f"unknown regressor {kind!r}; choose from {', '.join(REGRESSORS)}")


def fit_regressor(kind: str, X, y, **params) -> Regressor:
    return make_regressor(kind, **params).fit(X, y)


def regressor_from_dict(d: dict) -> Regressor:
    r = make_regressor(d["kind"], **d["params"])
    r.n_features = d["n_features"]
    r._load(d["state"])
    r.fitted = True
    return r
