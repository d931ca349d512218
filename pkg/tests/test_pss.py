import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import module
from toyenv import OneGoodPhaseEnv
from mlcomp.costmodel import code_size, profile
from mlcomp.features import extract_features
from mlcomp.interp import observables
from mlcomp.passes import PHASE_NAMES
from mlcomp.pss import (
    CompilerEnv, Episode, PhasePolicy, PolicyError, PssTrainConfig, TrainingError,
    discounted_returns, dumps_policy, fit_state_preprocessor, load_policy, optimize_program,
    policy_from_dict, policy_to_dict, rank_phases, reinforce_update, run_episode, save_policy,
    softmax, step_reward, surrogate, surrogate_gradient, train_config_from_kv, train_policy,
)
from mlcomp.tir import verify_module

FIXED_POINT = "func @main() {\nb:\n  ret 0\n}"


def rng(*seed):
    return np.random.default_rng(list(seed))


def test_config_defaults_and_validation():
    cfg = PssTrainConfig()
    assert (cfg.num_episodes, cfg.batch_size, cfg.learning_rate) == (512, 6, 0.1)
    assert (cfg.max_sequence_len, cfg.max_inactive_len, cfg.n_layers, cfg.hidden_size) == (128, 8, 3, 16)
    assert cfg.gamma == 0.99 and cfg.weights == (0.4, 0.4, 0.2) and cfg.kappa == 2.0
    for bad in ({"gamma": 0}, {"gamma": 1.5}, {"weights": (0.5, 0.5, 0.5)}, {"batch_size": 0},
                {"learning_rate": -1}):
        with pytest.raises(TrainingError):
            PssTrainConfig(**bad)
    cfg = train_config_from_kv({"episodes": "12", "weights": "0.5, 0.25, 0.25", "seed": "4"})
    assert (cfg.num_episodes, cfg.weights, cfg.seed) == (12, (0.5, 0.25, 0.25), 4)


def test_step_reward_examples():
    base = (10.0, 5.0, 100.0)
    assert step_reward(base, base, base) == 0.0
    w = (1 / 3, 1 / 3, 1 / 3)
    assert step_reward(base, (9.0, 5.0, 100.0), base, w, 2.0) == pytest.approx(0.1 / 3)
    assert step_reward(base, (9.0, 5.0, 110.0), base, w, 2.0) == pytest.approx(-0.2)
    with pytest.raises(TrainingError):
        step_reward(base, base, (1.0, 0.0, 1.0))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.1, 10), min_size=9, max_size=9), st.floats(0.01, 100))
def test_step_reward_positively_homogeneous(vals, c):
    prev, cur, base = vals[:3], vals[3:6], vals[6:]
    w, kappa = np.array([0.4, 0.4, 0.2]), 2.0
    assert step_reward(prev, cur, base, c * w, c * kappa) == pytest.approx(
        c * step_reward(prev, cur, base, w, kappa), rel=1e-9, abs=1e-12)


def test_softmax_stability():
    p = softmax(np.array([1000.0, -1000.0, 999.0]))
    assert np.all(np.isfinite(p)) and p.sum() == pytest.approx(1, abs=1e-12)
    policy = PhasePolicy.initialize(3, 4, rng(0))
    policy.biases[-1][:] = [1e3, -1e3, 5e2, 0]
    assert np.isclose(policy.forward(np.ones(3)).sum(), 1, atol=1e-9)


def test_forward_is_a_distribution():
    policy = PhasePolicy.initialize(5, 12, rng(1))
    X = rng(2).normal(size=(100, 5)) * 3
    P = policy.probs_from_inputs(X)
    assert np.all(P >= 0) and np.allclose(P.sum(axis=1), 1, atol=1e-9)
    assert np.array_equal(policy.forward(X[0]), policy.forward(X[0]))
    with pytest.raises(PolicyError):
        policy.forward(np.ones(4))


def test_small_weight_init_is_near_uniform():
    for seed in range(20):
        policy = PhasePolicy.initialize(9, 12, rng(seed, 0), init_scale=0.1)
        P = policy.probs_from_inputs(rng(seed, 1).normal(size=(100, 9)))
        assert np.all(P > 0.5 / 12) and np.all(P < 2 / 12)


def test_layer_shapes():
    policy = PhasePolicy.initialize(4, 12, rng(0), hidden_size=16, n_layers=3)
    assert policy.layer_sizes == [4, 16, 16, 12]
    for w, b in zip(policy.weights, policy.biases):
        bound = 1 / np.sqrt(w.shape[1])
        assert np.all(np.abs(w) <= bound) and np.all(np.abs(b) <= bound)


def test_gradient_matches_finite_differences():
    policy = PhasePolicy.initialize(4, 3, rng(3))
    X = rng(4).normal(size=(10, 4))
    actions = rng(5).integers(0, 3, 10)
    adv = rng(6).normal(size=10)
    grads = surrogate_gradient(policy, X, actions, adv)
    h = 1e-5
    worst = 0.0
    params = policy.params()
    for k, P in enumerate(params):
        for idx in np.ndindex(P.shape):
            plus = [q.copy() for q in params]
            minus = [q.copy() for q in params]
            plus[k][idx] += h
            minus[k][idx] -= h
            fd = (surrogate(policy.with_params(plus), X, actions, adv)
                  - surrogate(policy.with_params(minus), X, actions, adv)) / (2 * h)
            worst = max(worst, abs(fd - grads[k][idx]) / max(abs(fd), abs(grads[k][idx]), 1e-8))
    assert worst < 1e-4


def _episode(inputs, actions, returns):
    ep = Episode("p", states=list(inputs), inputs=list(inputs), actions=list(actions),
                 rewards=[0.0] * len(actions))
    ep.returns = np.asarray(returns, dtype=float)
    return ep


def test_update_moves_toward_positive_advantage():
    policy = PhasePolicy.initialize(2, 3, rng(7))
    x = np.array([0.3, -0.2])
    good = _episode([x, x], [1, 1], [2.0, 1.5])
    bad = _episode([x, x], [2, 0], [0.0, 0.0])
    new = reinforce_update(policy, [good, bad], 0.1)
    assert new.probs_from_inputs(x)[0, 1] > policy.probs_from_inputs(x)[0, 1]


def test_zero_advantage_leaves_policy_unchanged():
    policy = PhasePolicy.initialize(2, 3, rng(8))
    x = np.array([0.1, 0.4])
    eps = [_episode([x], [0], [1.0]), _episode([x], [2], [1.0])]
    new = reinforce_update(policy, eps, 0.1)
    for a, b in zip(new.params(), policy.params()):
        assert np.array_equal(a, b)
    with pytest.raises(TrainingError):
        reinforce_update(policy, [], 0.1)


def test_discounted_returns():
    r = [1.0, 0.0, -2.0, 0.5]
    G = discounted_returns(r, 0.9)
    for t in range(4):
        assert G[t] == pytest.approx(sum(0.9 ** (k - t) * r[k] for k in range(t, 4)), rel=1e-12)


def _forced(phase: str, d: int) -> PhasePolicy:
    policy = PhasePolicy.initialize(d, 12, rng(0), phases=PHASE_NAMES)
    policy.weights[-1][:] = 0.0
    policy.biases[-1][:] = -50.0
    policy.biases[-1][PHASE_NAMES.index(phase)] = 50.0
    return policy


def test_forced_inactive_episode(small_pe):
    m = module(FIXED_POINT)
    cfg = PssTrainConfig()
    env = CompilerEnv([("fp", m)], small_pe, cfg)
    policy = _forced("deadstore", 63)
    ep = run_episode(env, policy, cfg, rng(0))
    assert len(ep) == cfg.max_inactive_len == 8
    assert ep.terminal_reason == "inactive" and ep.changed_count == 0
    assert ep.rewards == [0.0] * 8


def test_zero_length_episode(programs, small_pe):
    cfg = PssTrainConfig(max_sequence_len=0)
    env = CompilerEnv([("sum", programs["sum1to10"])], small_pe, cfg)
    ep = run_episode(env, _forced("dce", 63), cfg, rng(0))
    assert len(ep) == 0 and ep.terminal_reason == "length"


def test_episode_invariants_and_determinism(corpus, small_pe):
    cfg = PssTrainConfig()
    env = CompilerEnv(corpus, small_pe, cfg)
    pre = fit_state_preprocessor(env.start_states())
    policy = PhasePolicy.initialize(pre.n_outputs, 12, rng(1), phases=PHASE_NAMES, preprocessor=pre)
    a = run_episode(env, policy, cfg, rng(5, 5))
    b = run_episode(CompilerEnv(corpus, small_pe, cfg), policy, cfg, rng(5, 5))
    assert a.actions == b.actions and a.rewards == b.rewards
    assert len(a.states) == len(a.actions) == len(a.rewards) == len(a.returns)
    assert np.allclose(a.returns, discounted_returns(a.rewards, cfg.gamma), rtol=1e-12, atol=0)
    assert a.terminal_reason in ("length", "inactive")


def test_compiler_env_rewards_use_exact_code_size(programs, small_pe, ember):
    cfg = PssTrainConfig(weights=(0.0, 0.0, 1.0), kappa=0.0)
    m = programs["polyeval"]
    env = CompilerEnv([("polyeval", m)], small_pe, cfg)
    env.reset(rng(0))
    _, r, changed = env.step(PHASE_NAMES.index("constfold"))
    assert changed
    expected = (code_size(m, ember) - code_size(env.module, ember)) / code_size(m, ember)
    assert r == pytest.approx(expected, rel=1e-12)


def test_one_update_when_episodes_equal_batch():
    env = OneGoodPhaseEnv(np.arange(63, dtype=float), good=3)
    policy = train_policy(None, None, PssTrainConfig(num_episodes=6, batch_size=6), env=env)
    assert policy.meta["updates"] == 1
    assert len(policy.meta["training_log"]) == 6
    assert policy.input_dim == 0


def test_default_batches():
    env = OneGoodPhaseEnv(np.zeros(63), good=0, n_actions=3)
    policy = train_policy(None, None, PssTrainConfig(max_sequence_len=4), env=env)
    assert policy.meta["updates"] == 86 == -(-512 // 6)
    assert len(policy.meta["training_log"]) == 512


def test_training_is_deterministic(corpus, small_pe):
    cfg = PssTrainConfig(num_episodes=12, seed=3)
    a = train_policy(corpus, small_pe, cfg)
    b = train_policy(corpus, small_pe, cfg)
    assert dumps_policy(a) == dumps_policy(b)


def test_toy_convergence():
    env = OneGoodPhaseEnv(np.linspace(0, 5, 63), good=7)
    policy = train_policy(None, None, PssTrainConfig(), env=env)
    assert policy.forward(env.features)[7] > 0.9


def test_rank_phases_ties_keep_registry_order():
    assert rank_phases(np.array([0.2, 0.4, 0.2, 0.2])) == [1, 0, 2, 3]


def test_optimize_fixed_point():
    m = module(FIXED_POINT)
    policy = PhasePolicy.initialize(0, 12, rng(0), phases=PHASE_NAMES,
                                    preprocessor=fit_state_preprocessor(np.zeros((1, 63))))
    out, applied, report = optimize_program(m, policy)
    assert out is m and applied == []
    assert report.terminal_reason == "inactive" and len(report.attempts) == 8
    assert [a["rank"] for a in report.attempts] == list(range(8))


def test_optimize_is_deterministic_and_sound(corpus, trained_policy):
    for _, m in corpus:
        out, applied, report = optimize_program(m, trained_policy)
        again = optimize_program(m, trained_policy)
        assert applied == again[1]
        verify_module(out)
        assert observables(out) == observables(m)
        assert len(applied) == sum(a["changed"] for a in report.attempts)


def test_optimize_matmul4_is_faster(programs, trained_policy, ember):
    m = programs["matmul4"]
    out, applied, _ = optimize_program(m, trained_policy)
    assert applied
    assert profile(out, ember).exec_time_s < profile(m, ember).exec_time_s


def test_policy_round_trip(trained_policy, tmp_path):
    path = tmp_path / "policy.json"
    save_policy(trained_policy, path)
    back = load_policy(path)
    X = rng(9).normal(size=(100, 63)) * 10 + 5
    for x in X:
        assert np.array_equal(back.forward(x), trained_policy.forward(x))
    doc = json.loads(path.read_text())
    assert doc["input_dim"] == trained_policy.input_dim
    assert doc["n_actions"] == 12
    assert doc["layer_sizes"] == [trained_policy.input_dim, 16, 16, 12]
    assert doc["phases"] == list(PHASE_NAMES) and doc["manifest_version"] == 1
    assert doc["preprocessor"]["kind"] == "pca"


def test_registry_mismatch(trained_policy, tmp_path):
    d = policy_to_dict(trained_policy)
    d["phases"] = list(reversed(d["phases"]))
    path = tmp_path / "p.json"
    path.write_text(json.dumps(d))
    with pytest.raises(PolicyError, match="registry mismatch"):
        load_policy(path)
    policy_from_dict(d, check_registry=False)


def test_corrupt_policy(tmp_path):
    path = tmp_path / "p.json"
    path.write_text("{ not json")
    with pytest.raises(PolicyError):
        load_policy(path)
    path.write_text(json.dumps({"format": "mlcomp-policy", "format_version": 1, "manifest_version": 1}))
    with pytest.raises(PolicyError):
        load_policy(path)


def test_start_state_preprocessor(corpus):
    S = np.array([extract_features(m).values for _, m in corpus])
    pre = fit_state_preprocessor(S)
    assert 0 < pre.n_outputs < 63
    Z = pre.transform(S)
    assert np.allclose(Z.mean(axis=0), 0, atol=1e-9)
    assert fit_state_preprocessor(S[:1]).n_outputs == 0
