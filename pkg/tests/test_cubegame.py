from itertools import product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from delphi.cubegame import (
    CubeGame,
    Observation,
    cubegame_reward,
    greedy_planner,
    random_oracle,
    secret_candidates,
)
from delphi.environments import hamming
from delphi.errors import (
    BudgetExceeded,
    DimensionError,
    IllegalSequence,
    InvalidArgument,
    InvalidConfig,
    LengthExceeded,
)

W4 = (-1, 1, 1, 1)
LAST4 = (-1, -1, -1, 1)

cube8 = list(product((1, -1), repeat=8))
secrets8 = list(secret_candidates(8))


def _bound(seq, w_star):
    p = len(w_star)
    last = seq[-1] if seq else (1,) * p
    far = hamming(last, w_star) >= p / 4
    return 0.75 ** (len(seq) + int(far))


def test_reward():
    assert cubegame_reward([], (1, 1, -1, -1)) == 0.5
    assert cubegame_reward([W4], W4) == 0.75
    seq = [(1, -1, 1, 1), (1, 1, -1, 1)]
    assert cubegame_reward(seq, W4) == pytest.approx(0.75 * 0.5 * 0.5)
    assert cubegame_reward([(-1, -1, -1, -1)], (1, 1, 1, -1)) == 0.0


def test_reward_errors():
    with pytest.raises(IllegalSequence) as excinfo:
        cubegame_reward([W4, W4], W4)
    assert excinfo.value.index == 2
    with pytest.raises(DimensionError):
        cubegame_reward([(1, -1)], W4)
    with pytest.raises(InvalidArgument):
        cubegame_reward([(1, 0, 1, 1)], W4)


def test_bounds_single_step():
    assert len(secrets8) == 238
    steps = [w for w in cube8 if hamming((1,) * 8, w) >= 2]
    for w_star in secrets8:
        value = cubegame_reward([], w_star)
        assert 0 < value <= _bound([], w_star)
        for w in steps:
            value = cubegame_reward([w], w_star)
            assert 0 <= value <= _bound([w], w_star) + 1e-12
            if hamming((1,) * 8, w) < 8 and hamming(w, w_star) < 8:
                assert value > 0


def test_bounds_two_steps(rng):
    checked = 0
    while checked < 3000:
        w1, w2 = (cube8[i] for i in rng.integers(len(cube8), size=2))
        if hamming((1,) * 8, w1) < 2 or hamming(w1, w2) < 2:
            continue
        w_star = secrets8[rng.integers(len(secrets8))]
        value = cubegame_reward([w1, w2], w_star)
        assert 0 <= value <= _bound([w1, w2], w_star) + 1e-12
        checked += 1


@given(st.lists(st.tuples(*[st.sampled_from([-1, 1])] * 4), max_size=3))
def test_legality(seq):
    prev = (1, 1, 1, 1)
    first_bad = None
    for i, w in enumerate(seq, 1):
        if hamming(prev, w) < 1:
            first_bad = i
            break
        prev = w
    if first_bad is None:
        value = cubegame_reward(seq, W4)
        assert 0 <= value <= _bound(seq, W4) + 1e-12
    else:
        with pytest.raises(IllegalSequence) as excinfo:
            cubegame_reward(seq, W4)
        assert excinfo.value.index == first_bad


def test_game_config():
    with pytest.raises(InvalidConfig, match="not admissible"):
        CubeGame(4, 2, (1, 1, 1, 1))
    with pytest.raises(InvalidConfig, match="mode must be"):
        CubeGame(4, 2, W4, mode="other")
    with pytest.raises(InvalidConfig, match="p must be"):
        CubeGame(1, 2)
    game = CubeGame(6, 2, seed=3)
    assert hamming((1,) * 6, game.w_star) in (2, 3, 4)
    assert CubeGame(6, 2, seed=3).w_star == game.w_star


def test_play_far():
    game = CubeGame(4, 3, W4, seed=0)
    for _ in range(20):
        assert game.play([(1, -1, 1, 1)]) == Observation(False, False, 0)
    assert game.plays == 20
    assert game.transcript[-1]["cumulative_samples"] == 20


def test_play_errors():
    game = CubeGame(4, 2, W4, seed=0)
    with pytest.raises(LengthExceeded, match="exceeds K=2"):
        game.play([(1, -1, 1, 1), (1, 1, -1, 1), (1, -1, 1, 1)])
    with pytest.raises(InvalidArgument):
        game.play()
    with pytest.raises(IllegalSequence):
        game.play([(1, 1, 1, 1)])
    assert game.plays == 0


def test_bernoulli_emission():
    game = CubeGame(4, 2, W4, seed=1)
    seq = [(1, -1, 1, 1), (1, 1, -1, 1)]
    n = 10000
    zs = np.array([game.play(seq).Z for _ in range(n)])
    f = 0.1875
    assert abs(zs.mean() - f) <= 4 * np.sqrt(f * (1 - f) / n)


def test_play_observations():
    game = CubeGame(4, 2, W4, seed=2)
    obs = game.play([(1, -1, 1, 1), W4])
    assert not obs.U
    assert obs.V
    obs = game.play([W4, (1, -1, 1, 1)])
    assert obs.U
    assert not obs.V
    obs = game.play([W4])
    assert obs.V
    assert not obs.U


def test_transcript_segments():
    game = CubeGame(4, 2, W4, seed=0)
    game.oracle((1, 1, 1, 1))
    game.play([(1, -1, 1, 1)], [(1, 1, -1, 1)])
    entry = game.transcript[0]
    assert entry["input_length"] == 2
    assert entry["sub_lengths"] == [1, 1]
    assert entry["oracle_queries"] == 1
    assert entry["t"] == 1
    game.play([(1, -1, 1, 1)])
    assert game.transcript[1]["oracle_queries"] == 0


def test_answer():
    game = CubeGame(4, 2, W4, seed=0)
    answer = [(1, -1, 1, 1), W4, (1, 1, 1, -1)]
    assert game.answer(answer) == pytest.approx(0.75 * 0.5)
    assert game.answer([(1, -1, 1, 1)]) == pytest.approx(0.75 * 0.5)
    with pytest.raises(InvalidArgument):
        game.answer([])
    with pytest.raises(InvalidArgument):
        game.answer([(1, -1, 1, 1), (1, 1, -1, 1)] * 5)
    assert game.plays == 0


def test_oracle():
    w_star = (1, 1, 1, 1, 1, -1, -1, 1)
    game = CubeGame(8, 2, w_star, oracle_budget=2)
    assert game.oracle((1,) * 8) == 5
    assert game.oracle(w_star) is None
    with pytest.raises(BudgetExceeded):
        game.oracle(w_star)
    assert game.oracle_calls == 2


def test_random_oracle_frequencies(rng):
    draws = [random_oracle(10, rng) for _ in range(10000)]
    freq = np.bincount(draws, minlength=10) / len(draws)
    assert len(freq) == 10
    assert np.all(np.abs(freq - 0.1) < 0.02)


def test_zero_modes():
    game = CubeGame(4, 2, W4, seed=0, mode="zero")
    assert game.play([W4]) == Observation(False, False, 0)
    assert game.play([(1, -1, 1, 1), (1, 1, -1, 1)]) == Observation(
        False, False, 0)
    assert game.answer([W4]) == 0.0
    assert game.oracle((1, 1, 1, 1)) == 0
    noisy = CubeGame(4, 2, W4, seed=0, mode="zero-random")
    answers = {noisy.oracle(W4) for _ in range(50)}
    assert answers <= {0, 1, 2, 3}
    assert len(answers) > 1


@pytest.mark.parametrize("w_star", list(secret_candidates(4)), ids=str)
def test_greedy_planner_p4(w_star):
    game = CubeGame(4, 2, w_star, seed=0)
    wrong = hamming((1, 1, 1, 1), w_star)
    res = greedy_planner(game)
    assert res.success
    assert res.oracle_calls == wrong
    assert res.samples == wrong
    assert res.answer == w_star
    assert res.reward == pytest.approx(1 - wrong / 4)


def test_greedy_planner_p8_stops_once_near():
    # V fires within p/4 = 2 of the secret, before every wrong bit is fixed
    for w_star in secrets8[:40]:
        game = CubeGame(8, 2, w_star, seed=0)
        wrong = hamming((1,) * 8, w_star)
        calls = next(f for f in range(1, wrong + 1)
                     if f >= 2 and wrong - f < 2)
        res = greedy_planner(game)
        assert res.success
        assert res.oracle_calls == calls <= wrong
        assert res.samples == calls - 1
        assert hamming(res.answer, w_star) < 2


def test_greedy_planner_without_oracle():
    game = CubeGame(4, 2, LAST4, seed=0)
    res = greedy_planner(game, budget=0, sample_cap=10)
    assert not res.success
    assert res.oracle_calls == 0
    assert res.samples == 10
    assert res.reward == 0.0
    game = CubeGame(4, 2, LAST4, seed=0)
    res = greedy_planner(game, budget=0, sample_cap=14)
    assert res.success
    assert res.samples == 14
    assert res.reward == 0.25


def test_greedy_planner_p8_answers_near_secret():
    w_star = (-1, -1, -1, -1, 1, 1, 1, 1)
    game = CubeGame(8, 2, w_star, seed=0)
    res = greedy_planner(game)
    assert res.success
    assert res.oracle_calls == 3
    assert res.samples == 2
    assert res.answer == (-1, -1, -1, 1, 1, 1, 1, 1)
    assert hamming(res.answer, w_star) == 1
