"""REINFORCE training of the phase-selection policy against PE estimates."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..costmodel import PlatformModel, code_size, static_counts
from ..features import extract_features
from ..kvfile import to_list
from ..mlkit import PCA
from ..passes import PHASE_NAMES, apply_phase
from ..pe import PeBundle, pe_inputs, predict_matrix
from ..tir.ir import Module
from ..tir.printer import print_module
from .policy import PhasePolicy, surrogate_gradient

OBJECTIVES = ("exec_time", "energy", "code_size")


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class PssTrainConfig:
    num_episodes: int = 512
    batch_size: int = 6
    learning_rate: float = 0.1
    max_sequence_len: int = 128
    max_inactive_len: int = 8
    n_layers: int = 3
    hidden_size: int = 16
    gamma: float = 0.99
    weights: tuple[float, float, float] = (0.4, 0.4, 0.2)
    kappa: float = 2.0
    seed: int = 0

    def __post_init__(self):
        ints = ("num_episodes", "batch_size", "n_layers", "hidden_size", "max_inactive_len")
        for name in ints:
            if getattr(self, name) < 1:
                raise TrainingError(f"{name} must be positive")
        if self.max_sequence_len < 0:
            raise TrainingError("max_sequence_len must be non-negative")
        if self.learning_rate <= 0 or self.kappa < 0:
            raise TrainingError("learning_rate must be positive and kappa non-negative")
        if not 0 < self.gamma <= 1:
            raise TrainingError("gamma must lie in (0, 1]")
        if len(self.weights) != 3 or any(w < 0 for w in self.weights):
            raise TrainingError("weights must be three non-negative numbers")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise TrainingError("objective weights must sum to 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = list(self.weights)
        return d


_KV_FIELDS = {
    "episodes": ("num_episodes", int), "num_episodes": ("num_episodes", int),
    "batch": ("batch_size", int), "batch_size": ("batch_size", int),
    "lr": ("learning_rate", float), "learning_rate": ("learning_rate", float),
    "max_len": ("max_sequence_len", int), "max_sequence_len": ("max_sequence_len", int),
    "max_inactive": ("max_inactive_len", int), "max_inactive_len": ("max_inactive_len", int),
    "n_layers": ("n_layers", int), "hidden_size": ("hidden_size", int),
    "gamma": ("gamma", float), "kappa": ("kappa", float),
    "pss_seed": ("seed", int),
}


def train_config_from_kv(kv: dict, base: PssTrainConfig | None = None) -> PssTrainConfig:
    cfg = base or PssTrainConfig()
    changes: dict = {}
    for key, value in kv.items():
        if key in _KV_FIELDS:
            name, conv = _KV_FIELDS[key]
            changes[name] = conv(value)
    if "seed" in kv and "pss_seed" not in kv:
        changes["seed"] = int(kv["seed"])
    if "weights" in kv:
        changes["weights"] = tuple(float(x) for x in to_list(kv["weights"]))
    return replace(cfg, **changes)


def step_reward(prev, cur, baseline, weights=(0.4, 0.4, 0.2), kappa: float = 2.0) -> float:
    """Weighted relative improvement minus ``kappa`` times any degradation.

    Each argument is ``(exec_time, energy, code_size)``; deltas are taken
    relative to the episode-start values in ``baseline``.
    """
    prev, cur, base = (np.asarray(v, dtype=float) for v in (prev, cur, baseline))
    if np.any(base <= 0):
        raise TrainingError("baseline metrics must be positive")
    r = (prev - cur) / base
    return float(np.dot(weights, r) - kappa * np.sum(np.maximum(0.0, -r)))


def discounted_returns(rewards, gamma: float) -> np.ndarray:
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


@dataclass
class Episode:
    program_id: str
    states: list = field(default_factory=list)  # raw feature vectors
    inputs: list = field(default_factory=list)  # network inputs
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    returns: np.ndarray = field(default_factory=lambda: np.zeros(0))
    terminal_reason: str = ""
    changed_count: int = 0

    def __len__(self) -> int:
        return len(self.actions)


class CompilerEnv:
    """Episodes over real programs; rewards come from PE estimates of time
    and energy and the exact code size."""

    def __init__(self, programs: list[tuple[str, Module]], pe: PeBundle, cfg: PssTrainConfig,
                 platform: PlatformModel | None = None):
        if not programs:
            raise TrainingError("no training programs")
        self.programs = list(programs)
        self.pe = pe
        self.cfg = cfg
        self.platform = platform or pe.platform()
        self.n_actions = len(PHASE_NAMES)
        self._info: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self._moves: dict[tuple[str, int], tuple[str, Module] | None] = {}

    def _describe(self, text: str, m: Module) -> tuple[np.ndarray, np.ndarray]:
        hit = self._info.get(text)
        if hit is None:
            f = np.array(extract_features(m).values)
            est = predict_matrix(self.pe, pe_inputs(f, static_counts(m))[None, :])[0]
            metrics = np.array([est[0], est[1], float(code_size(m, self.platform))])
            hit = self._info[text] = (f, metrics)
        return hit

    def start_states(self) -> np.ndarray:
        return np.array([self._describe(print_module(m), m)[0] for _, m in self.programs])

    def reset(self, rng: np.random.Generator) -> tuple[str, np.ndarray]:
        pid, m = self.programs[int(rng.integers(len(self.programs)))]
        self.module, self.text = m, print_module(m)
        f, metrics = self._describe(self.text, m)
        self.baseline = self.prev = metrics
        return pid, f

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        key = (self.text, action)
        if key not in self._moves:
            res = apply_phase(self.module, PHASE_NAMES[action])
            self._moves[key] = (print_module(res.module), res.module) if res.changed else None
        move = self._moves[key]
        if move is None:
            return self._info[self.text][0], 0.0, False
        self.text, self.module = move
        f, cur = self._describe(self.text, self.module)
        reward = step_reward(self.prev, cur, self.baseline, self.cfg.weights, self.cfg.kappa)
        self.prev = cur
        return f, reward, True


def run_episode(env, policy: PhasePolicy, cfg: PssTrainConfig, rng: np.random.Generator) -> Episode:
    """Sample phases from the policy until a length or inactivity cap is hit."""
    pid, f = env.reset(rng)
    ep = Episode(pid)
    inactive = 0
    while True:
        if ep.changed_count >= cfg.max_sequence_len:
            ep.terminal_reason = "length"
            break
        if inactive >= cfg.max_inactive_len:
            ep.terminal_reason = "inactive"
            break
        x = policy.encode(f)[0]
        p = policy.probs_from_inputs(x)[0]
        a = int(rng.choice(len(p), p=p))
        f_next, r, changed = env.step(a)
        ep.states.append(f)
        ep.inputs.append(x)
        ep.actions.append(a)
        ep.rewards.append(r)
        if changed:
            ep.changed_count += 1
            inactive = 0
        else:
            inactive += 1
        f = f_next
    ep.returns = discounted_returns(ep.rewards, cfg.gamma)
    return ep


def reinforce_update(policy: PhasePolicy, episodes: list[Episode], learning_rate: float) -> PhasePolicy:
    """One gradient-ascent step on ``sum log pi(a_t|s_t) (G_t - b)``, with
    ``b`` the mean start return of the batch."""
    if not episodes:
        raise TrainingError("empty batch")
    full = [ep for ep in episodes if len(ep)]
    if not full:
        return policy
    b = float(np.mean([ep.returns[0] for ep in full]))
    X = np.vstack([np.asarray(ep.inputs).reshape(len(ep), -1) for ep in full])
    actions = np.concatenate([ep.actions for ep in full])
    adv = np.concatenate([ep.returns for ep in full]) - b
    grads = surrogate_gradient(policy, X, actions, adv)
    return policy.with_params([p + learning_rate * g for p, g in zip(policy.params(), grads)])


def fit_state_preprocessor(start_states: np.ndarray) -> PCA:
    """z-score, PCA (MLE dimension) and whitening fitted on episode-start states."""
    S = np.asarray(start_states, dtype=float)
    if len(S) == 1:
        # one start state: every column is constant and the input dimension is 0
        S = np.vstack([S, S])
    return PCA(standardize=True, whiten=True).fit(S)


def train_policy(programs, pe: PeBundle | None, cfg: PssTrainConfig, env=None,
                 progress=None) -> PhasePolicy:
    """Train from a random policy; ``env`` overrides the compiler environment."""
    env = env or CompilerEnv(programs, pe, cfg)
    pre = fit_state_preprocessor(env.start_states())
    init_rng = np.random.default_rng([cfg.seed, 0])
    phases = PHASE_NAMES if env.n_actions == len(PHASE_NAMES) else None
    policy = PhasePolicy.initialize(pre.n_outputs, env.n_actions, init_rng, cfg.hidden_size,
                                    cfg.n_layers, phases, pre)
    log = []
    n_batches = math.ceil(cfg.num_episodes / cfg.batch_size)
    episode = 0
    for batch_idx in range(n_batches):
        batch = []
        for _ in range(min(cfg.batch_size, cfg.num_episodes - episode)):
            ep = run_episode(env, policy, cfg, np.random.default_rng([cfg.seed, 1, episode]))
            batch.append(ep)
            log.append({"episode": episode, "program": ep.program_id,
                        "return": float(ep.returns[0]) if len(ep) else 0.0,
                        "steps": len(ep), "changed": ep.changed_count,
                        "terminal": ep.terminal_reason})
            episode += 1
        policy = reinforce_update(policy, batch, cfg.learning_rate)
        if progress is not None:
            progress(batch_idx + 1, n_batches, batch)
    policy.meta = {"config": cfg.to_dict(), "updates": n_batches,
                   "pe_platform": pe.platform_name if pe is not None else None,
                   "training_log": log}
    return policy
