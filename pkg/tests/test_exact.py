from itertools import product

import numpy as np
import pytest

from delphi.algorithm import RunStats
from delphi.environments import bandit_mdp, chain_mdp, random_tabular_mdp
from delphi.errors import DimensionError, InvalidArgument, Unsupported
from delphi.exact import (
    check_delphi_eluder,
    exact_optimal,
    exact_value,
    realizing_parameter,
    verify_eluder_sequence,
)
from delphi.measure import TDVector
from delphi.version_space import VersionSpace

from .test_core import CoinSim


def test_constant_rewards():
    inst = chain_mdp([1.0, 1.0, 1.0])
    table = exact_value(inst.sim, inst.expert)
    assert table[inst.sim.states(1)[0]] == 3.0
    zero = chain_mdp([0.0, 0.0])
    assert exact_optimal(zero.sim)[zero.sim.states(1)[0]] == 0.0


def test_bandit_optimal():
    inst = bandit_mdp([0.2, 0.8])
    table = exact_optimal(inst.sim)
    s0 = inst.sim.states(1)[0]
    assert table.policy[s0] == 1
    assert table[s0] == pytest.approx(0.8)
    assert table.q[s0, 0] == pytest.approx(0.2)
    frame = table.to_frame()
    assert list(frame.columns) == ["h", "state", "v", "action"]
    assert len(frame) == 1


def test_optimal_ties_go_low(chain3):
    table = exact_optimal(chain3.sim)
    assert table.policy[chain3.sim.states(3)[0]] == 0


def test_bellman_residual(small_mdp):
    table = exact_optimal(small_mdp.sim)
    assert table.max_bellman_residual(small_mdp.sim) < 1e-12


def test_optimal_dominates_all_policies():
    inst = random_tabular_mdp(2, 2, 2, seed=3)
    sim = inst.sim
    states = [s for h in (1, 2) for s in sim.states(h)]
    best = exact_optimal(sim)
    for actions in product(range(2), repeat=len(states)):
        table = exact_value(sim, dict(zip(states, actions)))
        for s in states:
            assert best[s] >= table[s] - 1e-12


def test_sample_only_unsupported():
    sim = CoinSim(2, 1)
    with pytest.raises(Unsupported):
        exact_value(sim, lambda s: 0)


def test_realizing_parameter(small_mdp):
    theta, eta = realizing_parameter(small_mdp.sim, small_mdp.features,
                                     small_mdp.expert)
    np.testing.assert_allclose(theta, small_mdp.theta, atol=1e-9)
    assert eta < 1e-9


def test_eluder_orthonormal():
    eps = 0.1
    points = [np.concatenate(([0.0], row)) for row in np.eye(3)]
    params = [2 * eps * row for row in np.eye(3)]
    check = verify_eluder_sequence(points, params, np.zeros(3), eps)
    assert check
    assert check.first_violation is None


def test_eluder_violations():
    eps = 0.1
    x = [0.0, 1.0, 0.0]
    theta = [2 * eps, 0.0]
    check = verify_eluder_sequence([x, x], [theta, theta], [0.0, 0.0], eps)
    assert not check
    assert check.first_violation == 1
    check = verify_eluder_sequence([x], [[0.5 * eps, 0.0]], [0.0, 0.0], eps)
    assert check.first_violation == 0
    with pytest.raises(DimensionError, match="points but"):
        verify_eluder_sequence([x], [], [0.0, 0.0], eps)


def _forged_stats():
    space = VersionSpace(1.0, 1)
    td = TDVector([0.0, 1.0], 1, "refined")
    space = space.add_constraint(td, 0.01, iteration=1)
    space = space.add_constraint(td, 0.01, iteration=2)
    records = [{"t": 1, "theta": [0.5]}, {"t": 2, "theta": [0.5]}]
    return RunStats(constraints=space, records=records)


def test_check_delphi_eluder():
    assert check_delphi_eluder(RunStats(constraints=VersionSpace(1.0, 1)),
                               [0.0], 0.1)
    res = check_delphi_eluder(_forged_stats(), [0.0], 0.1)
    assert not res
    assert res.first_violation == 1
    with pytest.raises(InvalidArgument, match="no constraint dump"):
        check_delphi_eluder(RunStats(), [0.0], 0.1)
    stats = _forged_stats()
    stats.records = stats.records[:1]
    with pytest.raises(InvalidArgument, match="no parameter recorded"):
        check_delphi_eluder(stats, [0.0], 0.1)


def test_incomplete_policy(small_mdp):
    sim = small_mdp.sim
    policy = dict(small_mdp.expert)
    del policy[sim.states(2)[1]]
    with pytest.raises(InvalidArgument, match="no action for reachable"):
        exact_value(sim, policy)


def test_game_over_plays_first_action(cube4):
    table = exact_value(cube4.sim, cube4.expert)
    start = cube4.sim.states(1)[0]
    assert table[start] == pytest.approx(cube4.sim.expert_value(start))
