from concurrent.futures import ThreadPoolExecutor

import pytest

from delphi.core import State
from delphi.environments import GAME_OVER, bandit_mdp
from delphi.errors import BudgetExceeded, InvalidArgument, NoAction, Unsupported
from delphi.oracle import ExpertOracle, hypercube_oracle, make_tabular_expert

from .test_core import CoinSim


def test_query_counts(chain3):
    oracle = ExpertOracle(chain3.expert, 2, horizon=3)
    assert repr(oracle) == "<ExpertOracle: A=2, calls=0, budget=unlimited />"
    s1, s2 = State("c1", 1), State("c2", 2)
    assert oracle.query(s1, iteration=1) == 1
    assert oracle.query(s2, iteration=2) == 0
    assert oracle.call_count == 2
    assert oracle.call_log == [
        {"iteration": 1, "state": repr(s1), "action": 1,
         "cumulative_count": 1},
        {"iteration": 2, "state": repr(s2), "action": 0,
         "cumulative_count": 2},
    ]
    oracle.reset_count()
    assert oracle.call_count == 0
    assert oracle.call_log == []


def test_budget(chain3):
    oracle = ExpertOracle(chain3.expert, 2, horizon=3, budget=1)
    oracle.query(State("c1", 1))
    with pytest.raises(BudgetExceeded, match="budget of 1"):
        oracle.query(State("c2", 2))
    assert oracle.call_count == 1
    with pytest.raises(InvalidArgument):
        ExpertOracle(chain3.expert, 2, budget=-1)


def test_no_action(chain3):
    oracle = ExpertOracle(chain3.expert, 2, horizon=3)
    with pytest.raises(NoAction, match="terminal"):
        oracle.query(State("terminal", 4))
    with pytest.raises(NoAction):
        oracle.query(State("elsewhere", 2))
    assert oracle.call_count == 0


def test_bad_expert_action():
    oracle = ExpertOracle(lambda s: 5, 2)
    with pytest.raises(ValueError, match="outside"):
        oracle.query(State("x", 1))
    assert oracle.call_count == 0


def test_thread_safe_counting(small_mdp):
    oracle = ExpertOracle(small_mdp.expert, 2, horizon=3)
    s0 = small_mdp.sim.states(1)[0]
    with ThreadPoolExecutor(8) as pool:
        actions = list(pool.map(lambda _: oracle.query(s0), range(800)))
    assert set(actions) == {small_mdp.expert[s0]}
    assert oracle.call_count == 800
    counts = sorted(entry["cumulative_count"] for entry in oracle.call_log)
    assert counts == list(range(1, 801))


def test_tabular_expert():
    inst = bandit_mdp([0.2, 0.8])
    oracle = make_tabular_expert(inst.sim)
    assert oracle.query(inst.sim.restart()) == 1
    provided = make_tabular_expert(inst.sim, "provided", inst.expert,
                                   budget=3)
    assert provided.budget == 3
    with pytest.raises(InvalidArgument, match="requires a policy"):
        make_tabular_expert(inst.sim, "provided")
    with pytest.raises(InvalidArgument, match="mode must be"):
        make_tabular_expert(inst.sim, "greedy")
    with pytest.raises(Unsupported):
        make_tabular_expert(CoinSim(2, 1))


def test_hypercube_oracle(cube4):
    oracle = hypercube_oracle(cube4.sim, budget=2)
    assert oracle.query(cube4.sim.restart()) == 0
    with pytest.raises(NoAction):
        oracle.query(State(GAME_OVER, 3))
    assert oracle.call_count == 1
