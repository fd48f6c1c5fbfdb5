import numpy as np
import pytest

from delphi.algorithm import compute_hyperparameters
from delphi.core import TabularMdp
from delphi.environments import one_hot_action_features, one_hot_features
from delphi.errors import DeterminismViolation, TerminalStep
from delphi.measure import TDVector, measure_q_td, measure_td, true_q_td, true_td


@pytest.fixture
def split_mdp():
    """One start state whose single action reaches two states evenly."""
    return TabularMdp(
        [["s"], ["x", "y"]],
        [np.array([[[0.5, 0.5]]]), np.ones((2, 1, 1))],
        [np.array([[0.4]]), np.array([[0.0], [1.0]])],
        [1.0], seed=0)


def test_td_vector():
    td = TDVector([0.5, 1.0, -1.0], 10)
    assert td.reward == 0.5
    np.testing.assert_array_equal(td.feature_difference, [1.0, -1.0])
    assert td.residual([0.25, 0.5]) == pytest.approx(0.25)
    assert not td.values.flags.writeable
    assert TDVector.from_dict(td.to_dict()).tag == "measured"
    with pytest.raises(ValueError, match="tag must be one of"):
        TDVector([0.0], 1, "guessed")


def test_measure_deterministic(chain3):
    sim = chain3.sim
    fm = chain3.features
    s0 = sim.restart()
    td = measure_td(sim, fm, 1, 1)
    np.testing.assert_array_equal(td.values, [0.5, -1.0, 1.0, 0.0])
    assert td.n == 1
    assert sim.current_state == s0
    assert sim.sample_count == 1
    np.testing.assert_array_equal(true_td(sim, fm, s0, 1).values, td.values)


def test_measure_converges(small_mdp):
    sim = small_mdp.sim
    fm = small_mdp.features
    s0 = sim.restart()
    for a in range(sim.action_count):
        exact = true_td(sim, fm, s0, a)
        td = measure_td(sim, fm, a, 20000, tag="refined")
        assert td.tag == "refined"
        np.testing.assert_allclose(td.values, exact.values, atol=0.03)
    assert sim.sample_count == 40000


def test_expert_residual_is_zero(small_mdp):
    sim = small_mdp.sim
    fm = small_mdp.features
    for h in range(1, sim.horizon + 1):
        for s in sim.states(h):
            td = true_td(sim, fm, s, small_mdp.expert[s])
            assert abs(td.residual(small_mdp.theta)) < 1e-12


def test_true_td_terminal(small_mdp):
    sim = small_mdp.sim
    with pytest.raises(TerminalStep):
        true_td(sim, small_mdp.features, sim.states(4)[0], 0)


def test_measure_q_td(det_mdp):
    sim = det_mdp.sim
    fm = one_hot_action_features(sim)
    theta = det_mdp.meta["q_theta"]
    s0 = sim.restart()
    nxt, tds = measure_q_td(sim, fm, 0, 5)
    assert len(tds) == sim.action_count
    assert sim.current_state == s0
    exact = [true_q_td(sim, fm, s0, 0, a2) for a2 in range(sim.action_count)]
    for td, ex in zip(tds, exact):
        np.testing.assert_allclose(td.values, ex.values)
    assert abs(tds[det_mdp.expert[nxt]].residual(theta)) < 1e-12


def test_q_residual_is_zero(det_mdp):
    sim = det_mdp.sim
    fm = one_hot_action_features(sim)
    theta = det_mdp.meta["q_theta"]
    for h in range(1, sim.horizon + 1):
        for s in sim.states(h):
            for a in range(sim.action_count):
                (nxt,), _ = sim.transition_probs(s, a)
                a2 = det_mdp.expert.get(nxt, 0)
                td = true_q_td(sim, fm, s, a, a2)
                assert abs(td.residual(theta)) < 1e-12


def test_q_td_needs_determinism(split_mdp):
    fm = one_hot_action_features(split_mdp)
    split_mdp.restart()
    with pytest.raises(DeterminismViolation):
        measure_q_td(split_mdp, fm, 0, 200)
    with pytest.raises(DeterminismViolation):
        true_q_td(split_mdp, fm, split_mdp.states(1)[0], 0, 0)


def test_split_expectation(split_mdp):
    fm = one_hot_features(split_mdp)
    td = true_td(split_mdp, fm, split_mdp.states(1)[0], 0)
    np.testing.assert_allclose(td.values, [0.4, -1.0, 0.5, 0.5])


def test_measurement_concentration(small_mdp):
    sim = small_mdp.sim
    fm = small_mdp.features
    params = compute_hyperparameters(
        fm.d, sim.horizon, sim.action_count, small_mdp.B, 0.5, 0.1,
        overrides={"n_eval": 200, "E_d": 3 * (fm.d + 1)})
    s0 = sim.restart()
    exact = true_td(sim, fm, s0, 1).values
    worst = np.array([
        np.abs(measure_td(sim, fm, 1, params.n_eval).values - exact).max()
        for _ in range(200)])
    assert (worst > params.eps_eval).mean() <= params.delta
