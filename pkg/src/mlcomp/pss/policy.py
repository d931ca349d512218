"""Phase-selection policy: a small tanh MLP with a softmax over phases."""

from __future__ import annotations

import json
import math

import numpy as np

from ..features import MANIFEST_VERSION
from ..mlkit import preprocessor_from_dict
from ..passes import PHASE_NAMES

POLICY_FORMAT = "mlcomp-policy"
POLICY_VERSION = 1


class PolicyError(ValueError):
    pass


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class PhasePolicy:
    """``d -> hidden -> ... -> N`` network; hidden layers use tanh.

    ``preprocessor`` maps raw 63-entry feature vectors to the ``d`` network
    inputs.  ``phases`` snapshots the phase registry the policy was trained
    against.
    """

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray],
                 phases: tuple[str, ...], preprocessor=None, meta: dict | None = None):
        if len(weights) != len(biases) or not weights:
            raise PolicyError("weights and biases must be non-empty and paired")
        self.weights = weights
        self.biases = biases
        self.phases = tuple(phases)
        self.preprocessor = preprocessor
        self.meta = meta or {}
        if weights[-1].shape[0] != len(self.phases):
            raise PolicyError("output layer size does not match the phase count")

    @classmethod
    def initialize(cls, d: int, n_actions: int, rng: np.random.Generator, hidden_size: int = 16,
                   n_layers: int = 3, phases=None, preprocessor=None,
                   init_scale: float = 1.0) -> "PhasePolicy":
        """Uniform(-s/sqrt(fan_in), s/sqrt(fan_in)) weights and biases, s = ``init_scale``."""
        sizes = [d] + [hidden_size] * (n_layers - 1) + [n_actions]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = init_scale / math.sqrt(max(fan_in, 1))
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        phases = tuple(phases) if phases is not None else tuple(f"a{i}" for i in range(n_actions))
        return cls(weights, biases, phases, preprocessor)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_actions(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [w.shape[0] for w in self.weights]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def with_params(self, params: list[np.ndarray]) -> "PhasePolicy":
        return PhasePolicy(list(params[0::2]), list(params[1::2]), self.phases, self.preprocessor,
                           dict(self.meta))

    def encode(self, features) -> np.ndarray:
        """Raw feature rows to network inputs."""
        F = np.atleast_2d(np.asarray(features, dtype=float))
        X = F if self.preprocessor is None else self.preprocessor.transform(F)
        if X.shape[1] != self.input_dim:
            raise PolicyError(f"policy expects {self.input_dim} inputs, got {X.shape[1]}")
        return X

    def _forward(self, X: np.ndarray):
        acts = [X]
        h = X
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(h @ w.T + b)
            acts.append(h)
        logits = h @ self.weights[-1].T + self.biases[-1]
        return acts, softmax(logits)

    def probs_from_inputs(self, X) -> np.ndarray:
        return self._forward(np.atleast_2d(np.asarray(X, dtype=float)))[1]

    def forward(self, features) -> np.ndarray:
        """Phase distribution for one raw feature vector."""
        return self.probs_from_inputs(self.encode(features))[0]


def surrogate(policy: PhasePolicy, X, actions, advantages) -> float:
    """``sum_t A_t log pi(a_t | x_t)``, the quantity REINFORCE ascends."""
    _, P = policy._forward(np.atleast_2d(np.asarray(X, dtype=float)))
    a = np.asarray(actions, dtype=int)
    return float(np.sum(np.asarray(advantages, dtype=float) * np.log(P[np.arange(len(a)), a])))


def surrogate_gradient(policy: PhasePolicy, X, actions, advantages) -> list[np.ndarray]:
    """Analytic gradient of :func:`surrogate`, ordered like ``policy.params()``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    a = np.asarray(actions, dtype=int)
    A = np.asarray(advantages, dtype=float)
    acts, P = policy._forward(X)
    delta = -P
    delta[np.arange(len(a)), a] += 1.0
    delta *= A[:, None]
    grads: list[np.ndarray] = []
    for layer in range(len(policy.weights) - 1, -1, -1):
        h = acts[layer]
        grads.append(delta.sum(axis=0))
        grads.append(delta.T @ h)
        if layer > 0:
            delta = (delta @ policy.weights[layer]) * (1.0 - h * h)
    grads.reverse()
    return grads


def policy_to_dict(p: PhasePolicy) -> dict:
    return {
        "format": POLICY_FORMAT,
        "format_version": POLICY_VERSION,
        "manifest_version": MANIFEST_VERSION,
        "phases": list(p.phases),
        "input_dim": p.input_dim,
        "n_actions": p.n_actions,
        "layer_sizes": p.layer_sizes,
        "activation": "tanh",
        "weights": [w.tolist() for w in p.weights],
        "biases": [b.tolist() for b in p.biases],
        "preprocessor": None if p.preprocessor is None else p.preprocessor.to_dict(),
        "meta": p.meta,
    }


def policy_from_dict(d: dict, check_registry: bool = True) -> PhasePolicy:
    if d.get("format") != POLICY_FORMAT:
        raise PolicyError("not a policy file")
    if d.get("format_version") != POLICY_VERSION:
        raise PolicyError(f"unsupported policy version {d.get('format_version')}")
    if d.get("manifest_version") != MANIFEST_VERSION:
        raise PolicyError(f"policy feature manifest version {d.get('manifest_version')} does not "
                          f"match current version {MANIFEST_VERSION}")
    phases = tuple(d["phases"])
    if check_registry and phases != PHASE_NAMES:
        raise PolicyError("phase registry mismatch: policy was trained with "
                          f"[{', '.join(phases)}], this build has [{', '.join(PHASE_NAMES)}]")
    sizes = d["layer_sizes"]
    weights = [np.array(w, dtype=float).reshape(o, i) for w, i, o in zip(d["weights"], sizes[:-1], sizes[1:])]
    biases = [np.array(b, dtype=float).reshape(o) for b, o in zip(d["biases"], sizes[1:])]
    pre = None if d["preprocessor"] is None else preprocessor_from_dict(d["preprocessor"])
    return PhasePolicy(weights, biases, phases, pre, d.get("meta", {}))


def dumps_policy(p: PhasePolicy) -> str:
    return json.dumps(policy_to_dict(p), indent=1, sort_keys=True) + "\n"


def save_policy(p: PhasePolicy, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_policy(p))


def load_policy(path, check_registry: bool = True) -> PhasePolicy:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PolicyError(f"{path}: corrupted policy file: {exc}") from None
    try:
        return policy_from_dict(d, check_registry)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, PolicyError):
            raise
        raise PolicyError(f"{path}: corrupted policy file: {exc!r}") from None


__all__ = ["PhasePolicy", "PolicyError", "softmax", "surrogate", "surrogate_gradient",
           "save_policy", "load_policy", "dumps_policy", "policy_to_dict", "policy_from_dict"]
