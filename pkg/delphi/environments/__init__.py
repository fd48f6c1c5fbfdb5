"""Concrete environments: tabular fixtures, hypercube MDP and wrappers."""

__all__ = [
    "EnvInstance",
    "GAME_OVER",
    "HypercubeMdp",
    "HypercubeState",
    "InaccurateSim",
    "MisspecifiedFeatureMap",
    "bandit_mdp",
    "build_tree_counterexample",
    "chain_mdp",
    "hamming",
    "hypercube_expert",
    "hypercube_expert_value",
    "hypercube_instance",
    "hypercube_policy_features",
    "hypercube_policy_param",
    "hypercube_reward",
    "hypercube_transition",
    "hypercube_value_features",
    "hypercube_value_param",
    "is_admissible",
    "one_hot_action_features",
    "one_hot_features",
    "random_secret",
    "random_tabular_mdp",
    "wrap_inaccurate",
]

from delphi.environments._base import EnvInstance
from delphi.environments._hypercube import (
    GAME_OVER,
    HypercubeMdp,
    HypercubeState,
    hamming,
    hypercube_expert,
    hypercube_expert_value,
    hypercube_instance,
    hypercube_policy_features,
    hypercube_policy_param,
    hypercube_reward,
    hypercube_transition,
    hypercube_value_features,
    hypercube_value_param,
    is_admissible,
    random_secret,
)
from delphi.environments._tabular import (
    bandit_mdp,
    chain_mdp,
    one_hot_action_features,
    one_hot_features,
    random_tabular_mdp,
)
from delphi.environments._tree import build_tree_counterexample
from delphi.environments._wrappers import (
    InaccurateSim,
    MisspecifiedFeatureMap,
    wrap_inaccurate,
)
