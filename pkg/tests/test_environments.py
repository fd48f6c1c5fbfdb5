from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delphi.core import State
from delphi.environments import (
    GAME_OVER,
    HypercubeState,
    InaccurateSim,
    MisspecifiedFeatureMap,
    bandit_mdp,
    build_tree_counterexample,
    chain_mdp,
    hamming,
    hypercube_expert,
    hypercube_instance,
    hypercube_reward,
    hypercube_transition,
    is_admissible,
    one_hot_action_features,
    random_secret,
    random_tabular_mdp,
    wrap_inaccurate,
)
from delphi.errors import InvalidArgument, InvalidConfig, NoAction
from delphi.exact import exact_optimal, exact_value, realizing_parameter

pm_vectors = st.integers(2, 10).flatmap(
    lambda p: st.tuples(*[st.lists(st.sampled_from([-1, 1]),
                                   min_size=p, max_size=p)] * 3))

admissible4 = [s for s in product((1, -1), repeat=4) if is_admissible(s)]


def _instances():
    return [
        chain_mdp([[0.2, 0.5], [0.9, 0.1], [0.3, 0.3]], seed=1),
        bandit_mdp([0.2, 0.8, 0.5], seed=2),
        random_tabular_mdp(2, 3, 2, seed=11),
        random_tabular_mdp(3, 4, 3, seed=4, deterministic=True,
                           bernoulli=False),
    ]


@pytest.mark.parametrize("inst", _instances(),
                         ids=["chain", "bandit", "random", "deterministic"])
def test_tabular_linear_values(inst):
    sim = inst.sim
    table = exact_value(sim, inst.expert)
    for h in range(1, sim.horizon + 1):
        for s in sim.states(h):
            assert inst.features(s) @ inst.theta == pytest.approx(table[s])
            assert inst.meta["v"][s] == pytest.approx(table[s])
    assert table.max_bellman_residual(sim) < 1e-12
    theta, eta = realizing_parameter(sim, inst.features, inst.expert)
    np.testing.assert_allclose(theta, inst.theta, atol=1e-9)
    assert eta < 1e-9


def test_tabular_action_features(det_mdp):
    sim = det_mdp.sim
    fm = one_hot_action_features(sim)
    assert fm.d == sim.n_states * sim.action_count
    q = det_mdp.meta["q"]
    for (s, a), value in q.items():
        assert fm(s, a) @ det_mdp.meta["q_theta"] == pytest.approx(value)


def test_random_planted_gap():
    inst = random_tabular_mdp(3, 3, 3, seed=8, min_gap=0.2)
    q = inst.meta["q"]
    sim = inst.sim
    for h in range(1, sim.horizon + 1):
        for s in sim.states(h):
            e = inst.expert[s]
            for a in range(sim.action_count):
                if a != e:
                    assert q[s, e] >= q[s, a] + 0.2 - 1e-9
    best = exact_optimal(sim)
    assert best.policy == inst.expert


def test_random_errors():
    with pytest.raises(InvalidArgument):
        random_tabular_mdp(0, 3, 2)


@given(pm_vectors)
def test_hamming_metric(vectors):
    x, y, z = vectors
    assert hamming(x, x) == 0
    assert hamming(x, y) == hamming(y, x)
    assert hamming(x, z) <= hamming(x, y) + hamming(y, z)
    assert hamming(x, y) == sum(a != b for a, b in zip(x, y))


@settings(max_examples=30)
@given(st.integers(2, 12), st.integers(0, 2 ** 32 - 1))
def test_random_secret_admissible(p, seed):
    s_star = random_secret(p, seed)
    assert len(s_star) == p
    assert is_admissible(s_star)


def test_hypercube_transitions():
    s_star = (1, 1, -1, -1, 1, 1, 1, 1)
    hs = HypercubeState.start(8)
    hs = hypercube_transition(hs, 0, s_star)
    assert hs.s == (-1, 1, 1, 1, 1, 1, 1, 1)
    assert hs.fix == (1, 0, 0, 0, 0, 0, 0, 0)
    assert hs.i == 1
    # repeat within the first p/4 steps
    assert hypercube_transition(hs, 0, s_star).game_over
    hs = hypercube_transition(hs, 1, s_star)
    frozen = hypercube_transition(hs, 0, s_star)
    assert frozen.frozen
    assert frozen.fix == (1,) * 8
    assert frozen.s == hs.s
    assert hypercube_transition(frozen, 5, s_star).s == hs.s


def test_hypercube_phase_end():
    s_star = (-1, 1, 1, 1)
    hs = HypercubeState.start(4)
    for a in (1, 2, 3, 0):
        hs = hypercube_transition(hs, a, s_star)
    assert hs.k == 1
    assert hs.i == 0
    assert hs.s == (-1, -1, -1, -1)
    assert hs.history == ((1, 1, 1, 1), (-1, -1, -1, -1))
    assert not hs.game_over
    # flip bit 0 then freeze; the phase ends on the secret
    hs = HypercubeState.start(4)
    for a in (0, 0, 0, 0):
        hs = hypercube_transition(hs, a, s_star)
    assert hs.game_over
    assert hs.history == ((1, 1, 1, 1), s_star)
    assert hypercube_reward(hs.history, s_star) == 0.75


def test_hypercube_reward():
    s_star = (-1, 1, 1, 1)
    assert hypercube_reward([(1, 1, 1, 1)], s_star) == 0.75
    history = [(1, 1, 1, 1), (1, -1, -1, 1)]
    assert hypercube_reward(history, s_star) == pytest.approx(0.5 * 0.25)


def test_hypercube_errors():
    with pytest.raises(InvalidConfig, match="not admissible"):
        hypercube_instance(4, 2, (1, 1, 1, 1))
    with pytest.raises(InvalidConfig, match="p must be"):
        hypercube_instance(1, 2, (1,))
    with pytest.raises(InvalidConfig, match="feature_kind"):
        hypercube_instance(4, 2, (-1, 1, 1, 1), feature_kind="other")


def test_hypercube_expert_no_action(cube4):
    sim = cube4.sim
    with pytest.raises(NoAction):
        sim.expert_action(State(GAME_OVER, 3))
    over = HypercubeState(0, 1, (1,) * 4, ((1,) * 4,), (0,) * 4,
                          game_over=True)
    with pytest.raises(NoAction):
        hypercube_expert(over, (-1, 1, 1, 1))


def test_hypercube_sim(cube4):
    sim = cube4.sim
    assert sim.horizon == 8
    assert sim.action_count == 4
    s0 = sim.restart()
    assert cube4.expert_action(s0) == 0
    total = 0.0
    state = s0
    while not sim.is_terminal(state):
        reward, state = sim.step(cube4.expert_action(state)
                                 if state.key != GAME_OVER else 0)
        total += reward
    # the expert reaches the secret at the first phase end
    assert total == 0.75
    assert sim.sample_count == 8


@pytest.mark.parametrize("s_star", admissible4, ids=str)
def test_hypercube_features_exhaustive(s_star):
    inst = hypercube_instance(4, 2, s_star, seed=0)
    sim = inst.sim
    table = exact_value(sim, inst.expert)
    pol = hypercube_instance(4, 2, s_star, feature_kind="policy")
    for h in range(1, sim.horizon + 1):
        for s in table.layers[h]:
            value = inst.features(s) @ inst.theta
            assert value == pytest.approx(table[s], abs=1e-9)
            assert sim.expert_value(s) == pytest.approx(table[s], abs=1e-12)
            if s.key == GAME_OVER:
                continue
            scores = [pol.features(s, a) @ pol.theta
                      for a in range(sim.action_count)]
            assert int(np.argmax(scores)) == inst.expert_action(s)
    start = table.start_states[0]
    best = exact_optimal(sim)
    assert best[start] >= table[start] - 1e-12
    if hamming((1, 1, 1, 1), s_star) <= 1:
        assert best[start] == pytest.approx(table[start], abs=1e-12)


def test_hypercube_feature_norms(cube4):
    sim = cube4.sim
    for states in sim.enumerate_states().values():
        for s in states:
            assert np.linalg.norm(cube4.features(s)) <= 1 + 1e-9


def test_tree_counterexample():
    inst = build_tree_counterexample(3, seed=0)
    sim = inst.sim
    q = inst.meta["q"]
    for (s, a), value in q.items():
        assert inst.features(s, a) @ inst.theta == value
    table = exact_value(sim, inst.expert)
    assert table[sim.restart()] == inst.meta["v"][sim.restart()]
    greedy_differs = False
    for h in range(1, sim.horizon + 1):
        for s in sim.states(h):
            scores = [inst.features(s, a) @ inst.theta for a in (0, 1)]
            if int(np.argmax(scores)) != inst.expert[s]:
                greedy_differs = True
    assert greedy_differs
    with pytest.raises(InvalidArgument):
        build_tree_counterexample(1)


def test_tree_root_tie():
    inst = build_tree_counterexample(2)
    root = inst.sim.states(1)[0]
    assert inst.meta["q"][root, 0] == inst.meta["q"][root, 1] == 0.0
    assert inst.expert[root] == 1


def test_inaccurate_sim(small_mdp):
    sim = small_mdp.sim
    lam = 0.05
    wrapped = wrap_inaccurate(sim, lam, offset_seed=3)
    again = wrap_inaccurate(sim, lam, offset_seed=3)
    assert not wrapped.deterministic
    for h in range(1, sim.horizon + 1):
        for s in sim.states(h):
            for a in range(sim.action_count):
                off = wrapped.offset(s, a)
                assert abs(off) <= lam
                assert off == again.offset(s, a)
                for _, r, _ in wrapped.outcomes(s, a):
                    assert 0.0 <= r <= 1.0
    base = exact_value(sim, small_mdp.expert)
    shifted = exact_value(wrapped, small_mdp.expert)
    start = base.start_states[0]
    assert abs(shifted[start] - base[start]) <= sim.horizon * lam + 1e-12


def test_inaccurate_rules(chain3):
    sim = chain3.sim
    const = InaccurateSim(sim, 0.1, "constant")
    assert const.deterministic == sim.deterministic
    s0 = sim.states(1)[0]
    assert const.outcomes(s0, 0) == [(1.0, pytest.approx(0.3), sim.states(2)[0])]
    bad = InaccurateSim(sim, 0.1, lambda s, a: 0.5)
    with pytest.raises(InvalidArgument, match="exceeds"):
        bad.offset(s0, 0)
    with pytest.raises(InvalidArgument):
        InaccurateSim(sim, -0.1)
    with pytest.raises(InvalidArgument):
        InaccurateSim(sim, 0.1, "other")


def test_misspecified_features(small_mdp, rng):
    sim = small_mdp.sim
    eta, B = 0.05, 2.0
    fm = MisspecifiedFeatureMap(small_mdp.features, eta, B, seed=1)
    for _ in range(10):
        theta = rng.standard_normal(fm.d)
        theta *= B / np.linalg.norm(theta)
        for h in range(1, sim.horizon + 1):
            for s in sim.states(h):
                assert np.linalg.norm(fm(s)) <= 1 + 1e-12
                delta = fm(s) @ theta - small_mdp.features(s) @ theta
                assert abs(delta) <= eta + 1e-12
    with pytest.raises(InvalidArgument):
        MisspecifiedFeatureMap(small_mdp.features, 0.1, 0.0)
