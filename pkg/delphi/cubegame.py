"""Bandit-like hypercube game with a bit-revealing oracle.

A planner inputs sequences of ±1 vectors starting from the all-ones vector,
each step at Hamming distance at least p/4 from the previous one. It
observes whether the sequence ends near the secret ``w★`` and, near the
secret or at full length, a Bernoulli reward. An oracle reveals the first
wrong bit of a vector.
"""

__all__ = [
    "CubeGame",
    "Observation",
    "PlannerResult",
    "cubegame_reward",
    "greedy_planner",
    "random_oracle",
    "secret_candidates",
]

import itertools
from typing import NamedTuple

import numpy as np

from delphi.environments import hamming, is_admissible, random_secret
from delphi.environments._hypercube import g
from delphi.errors import (
    BudgetExceeded,
    DimensionError,
    IllegalSequence,
    InvalidArgument,
    InvalidConfig,
    LengthExceeded,
)
from delphi.logger import check_logger
from delphi.util import abbr_str

MODES = ("standard", "zero", "zero-random")
ANSWER_LENGTH = 8


class Observation(NamedTuple):
    """Outcome of one play: proximity before and after the last step, and
    the reward bit."""

    U: bool
    V: bool
    Z: int


def _as_sequence(seq, p=None):
    seq = [tuple(int(x) for x in w) for w in seq]
    for w in seq:
        if p is not None and len(w) != p:
            raise DimensionError(f"vectors must have length {p}")
        if any(x not in (-1, 1) for x in w):
            raise InvalidArgument(f"vectors must be ±1; found {abbr_str(w)}")
    return seq


def _check_legal(seq, p):
    prev = (1,) * p
    for i, w in enumerate(seq, 1):
        if hamming(prev, w) < p / 4:
            raise IllegalSequence(
                f"step {i} moves only {hamming(prev, w)} bits; "
                f"at least {p / 4:g} needed", index=i)
        prev = w


def cubegame_reward(seq, w_star):
    """Return ``f(seq) = (∏ g(ρ(w_{i−1}, w_i))) · g(ρ(w_k, w★))``.

    ``w_0`` is the all-ones vector; the empty sequence gives
    ``g(ρ(w_0, w★))``.

    Examples
    --------
    >>> cubegame_reward([], (1, 1, -1, -1))
    0.5
    >>> cubegame_reward([(-1, 1, 1, 1)], (-1, 1, 1, 1))
    0.75
    """
    w_star = tuple(int(x) for x in w_star)
    p = len(w_star)
    seq = _as_sequence(seq, p)
    _check_legal(seq, p)
    history = [(1,) * p] + seq
    value = 1.0
    for prev, cur in zip(history[:-1], history[1:]):
        value *= g(hamming(prev, cur), p)
    return value * g(hamming(history[-1], w_star), p)


def random_oracle(p, rng=None):
    """Return a uniformly random bit index in ``range(p)``."""
    rng = np.random.default_rng(rng)
    return int(rng.integers(p))


def secret_candidates(p):
    """Yield every admissible secret in a fixed order."""
    for w in itertools.product((1, -1), repeat=p):
        if is_admissible(w):
            yield w


class CubeGame:
    """One instance of the game with secret ``w_star``.

    Parameters
    ----------
    p : int
        Dimension.
    K : int
        Maximum input length per play.
    w_star : array_like, optional
        Admissible secret; drawn from ``seed`` if None.
    seed : int, optional
        Seed of the secret draw, Bernoulli rewards and random oracle.
    mode : {"standard", "zero", "zero-random"}, default "standard"
        "zero" always observes ``(0, 0, 0)`` but keeps the true oracle;
        "zero-random" also replaces the oracle with uniform bits.
    oracle_budget : int, optional
        Maximum number of oracle queries.
    logger : logging.Logger, optional
        Logger to show messages.

    Attributes
    ----------
    plays : int
        Number of plays so far.
    oracle_calls : int
        Number of oracle queries so far.
    transcript : list of dict
        One entry per play.

    """

    def __init__(self, p, K, w_star=None, seed=None, mode="standard",
                 oracle_budget=None, logger=None):
        check_logger(self, logger)
        if int(p) != p or p < 2:
            raise InvalidConfig(f"p must be an integer ≥ 2; found {p!r}")
        if int(K) != K or K < 1:
            raise InvalidConfig(f"K must be a positive integer; found {K!r}")
        if mode not in MODES:
            raise InvalidConfig(f"mode must be one of {MODES}; found {mode!r}")
        self.p = int(p)
        self.K = int(K)
        self.mode = mode
        self.rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(seed)))
        if w_star is None:
            w_star = random_secret(self.p, self.rng)
        w_star = tuple(int(x) for x in w_star)
        if len(w_star) != self.p or not is_admissible(w_star):
            raise InvalidConfig(
                f"secret {abbr_str(w_star)} is not admissible for p={self.p}")
        self.w_star = w_star
        self.oracle_budget = oracle_budget
        self.plays = 0
        self.oracle_calls = 0
        self.transcript = []
        self._pending_queries = 0
        self.logger.info("creating %s: p=%d, K=%d, mode=%s",
                         self.__class__.__name__, self.p, self.K, mode)

    def __repr__(self):
        return (f"<{self.__class__.__name__}: p={self.p}, K={self.K}, "
                f"mode={self.mode}, plays={self.plays}, "
                f"oracle calls={self.oracle_calls} />")

    def _near(self, w):
        return hamming(w, self.w_star) < self.p / 4

    def reward(self, seq):
        """Mean reward ``f_{w★}(seq)``; 0 in the zero modes."""
        if self.mode != "standard":
            return 0.0
        return cubegame_reward(seq, self.w_star)

    def play(self, *segments):
        """Play one input made of one or more segments.

        Segments are joined into a single sequence; oracle queries made
        since the previous play are logged with this play.

        Returns
        -------
        Observation

        """
        seq = _as_sequence(
            [w for segment in segments for w in segment], self.p)
        sub_lengths = [len(segment) for segment in segments]
        L = len(seq)
        if L == 0:
            raise InvalidArgument("a play needs at least one vector")
        if L > self.K:
            raise LengthExceeded(
                f"input length {L} exceeds K={self.K}")
        _check_legal(seq, self.p)
        if self.mode == "standard":
            before = seq[-2] if L > 1 else (1,) * self.p
            U = self._near(before)
            V = self._near(seq[-1])
            Z = 0
            if V or L == self.K:
                Z = int(self.rng.random() < cubegame_reward(seq, self.w_star))
        else:
            U, V, Z = False, False, 0
        obs = Observation(bool(U), bool(V), Z)
        self.plays += 1
        self.transcript.append({
            "t": self.plays,
            "input_length": L,
            "sub_lengths": sub_lengths,
            "oracle_queries": self._pending_queries,
            "observation": [int(obs.U), int(obs.V), obs.Z],
            "cumulative_samples": self.plays,
        })
        self._pending_queries = 0
        self.logger.debug("play %d, length %d: %s", self.plays, L, obs)
        return obs

    def answer(self, seq):
        """Score a final answer of at most 8 vectors.

        The reward is ``f`` of the prefix ending at the first vector within
        p/4 of the secret, or of the whole answer.
        """
        seq = _as_sequence(seq, self.p)
        if not 1 <= len(seq) <= ANSWER_LENGTH:
            raise InvalidArgument(
                f"an answer has 1 to {ANSWER_LENGTH} vectors; found {len(seq)}")
        _check_legal(seq, self.p)
        k = len(seq)
        for i, w in enumerate(seq, 1):
            if self._near(w):
                k = i
                break
        return self.reward(seq[:k])

    def oracle(self, w):
        """Return the first bit of ``w`` that disagrees with the secret.

        Returns None when every bit agrees. In "zero-random" mode the
        answer is a uniformly random bit.
        """
        w = _as_sequence([w], self.p)[0]
        if self.oracle_budget is not None and \
                self.oracle_calls >= self.oracle_budget:
            raise BudgetExceeded(
                f"oracle budget of {self.oracle_budget} queries is exhausted")
        self.oracle_calls += 1
        self._pending_queries += 1
        if self.mode == "zero-random":
            return random_oracle(self.p, self.rng)
        for j, (x, y) in enumerate(zip(w, self.w_star)):
            if x != y:
                return j
        return None


class PlannerResult(NamedTuple):
    success: bool
    oracle_calls: int
    samples: int
    answer: tuple
    reward: float


def greedy_planner(game, budget=None, sample_cap=1000):
    """Fix bits with the oracle, probing the running vector when legal.

    With oracle budget the planner queries at the running vector, flips the
    reported bit and, when the vector is a legal one-step input, plays it;
    it stops once a play observes V. Without budget left it plays the
    admissible secrets in a fixed order until ``sample_cap`` plays.

    V only says the vector is within p/4 of the secret, so the planner uses
    one query per initially wrong bit only while p/4 ≤ 1. For larger p it
    stops as soon as fewer than p/4 wrong bits remain (and at least p/4
    were fixed, for legality), answering a vector near the secret rather
    than the secret itself. Fixing every bit would take one more query, the
    one the oracle answers with None.

    Parameters
    ----------
    game : CubeGame
        Game to play.
    budget : int, optional
        Oracle queries to use; defaults to ``game.p``.
    sample_cap : int, default 1000
        Maximum number of plays.

    Returns
    -------
    PlannerResult

    """
    p = game.p
    budget = p if budget is None else int(budget)
    calls0, plays0 = game.oracle_calls, game.plays
    w = [1] * p
    found = None

    def used():
        return game.plays - plays0

    for _ in range(budget):
        j = game.oracle(tuple(w))
        if j is None:
            found = tuple(w)
            break
        w[j] = -w[j]
        if hamming((1,) * p, w) >= p / 4 and used() < sample_cap:
            if game.play([tuple(w)]).V:
                found = tuple(w)
                break
    if found is None:
        for cand in secret_candidates(p):
            if used() >= sample_cap:
                break
            if game.play([cand]).V:
                found = cand
                break
    calls = game.oracle_calls - calls0
    if found is None or hamming((1,) * p, found) < p / 4:
        return PlannerResult(False, calls, used(), None, 0.0)
    return PlannerResult(True, calls, used(), found, game.answer([found]))
