"""Common code for testing."""
import sys
from pathlib import Path

import numpy as np
import pytest

# Import this local package for tests
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))
import delphi  # noqa: E402
from delphi.environments import (  # noqa: E402
    chain_mdp,
    hypercube_instance,
    random_tabular_mdp,
)

# overrides for exact measurements on deterministic MDPs
EXACT_OVERRIDES = {"n_eval": 1, "n_rollout": 1, "eps_bar_eval": 0.0025}

# overrides for sampled measurements on small stochastic MDPs; eps_tol is
# derived as 4 * eps_bar_eval
STOCHASTIC_OVERRIDES = {"n_eval": 500, "n_rollout": 30, "eps_bar_eval": 0.0375,
                        "tau": 0.03}

# (width, H, A) of the stochastic layered MDPs
STOCHASTIC_SHAPES = [(2, 3, 2), (3, 3, 2), (2, 3, 3), (3, 3, 3), (2, 4, 2)]


def exact_overrides(d):
    return dict(EXACT_OVERRIDES, E_d=d + 1)


def stochastic_overrides(d):
    return dict(STOCHASTIC_OVERRIDES, E_d=3 * (d + 1))


@pytest.fixture
def chain3():
    return chain_mdp([[0.2, 0.5], [0.9, 0.1], [0.3, 0.3]], seed=1)


@pytest.fixture
def small_mdp():
    """Stochastic layered MDP with 2 actions and Bernoulli rewards."""
    return random_tabular_mdp(2, 3, 2, seed=11)


@pytest.fixture
def det_mdp():
    """Deterministic layered MDP with deterministic rewards."""
    return random_tabular_mdp(2, 3, 2, seed=5, deterministic=True,
                              bernoulli=False)


@pytest.fixture
def cube4():
    return hypercube_instance(4, 2, (-1, 1, 1, 1), seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


__all__ = ["delphi"]
