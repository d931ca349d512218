"""Phase-selection policy: network, REINFORCE training and deployment."""

from .deploy import OptimizeReport, optimize_program, rank_phases
from .policy import (
    PhasePolicy, PolicyError, dumps_policy, load_policy, policy_from_dict, policy_to_dict,
    save_policy, softmax, surrogate, surrogate_gradient,
)
from .train import (
    CompilerEnv, Episode, PssTrainConfig, TrainingError, discounted_returns,
    fit_state_preprocessor, reinforce_update, run_episode, step_reward, train_config_from_kv,
    train_policy,
)

__all__ = [
    "OptimizeReport", "optimize_program", "rank_phases",
    "PhasePolicy", "PolicyError", "dumps_policy", "load_policy", "policy_from_dict",
    "policy_to_dict", "save_policy", "softmax", "surrogate", "surrogate_gradient",
    "CompilerEnv", "Episode", "PssTrainConfig", "TrainingError", "discounted_returns",
    "fit_state_preprocessor", "reinforce_update", "run_episode", "step_reward",
    "train_config_from_kv", "train_policy",
]
