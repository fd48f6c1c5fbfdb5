"""Hypercube lower-bound MDP with its value and policy feature maps.

A state walks the p-dimensional ±1 hypercube in K phases of p steps. Each
step flips one bit, and a bit may be flipped only once per phase. Phase-end
vectors form the history that the reward is computed from.
"""

__all__ = [
    "GAME_OVER",
    "VALUE_SCALE",
    "HypercubeMdp",
    "HypercubeState",
    "g",
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
    "random_secret",
]

from dataclasses import dataclass, replace

import numpy as np

from delphi.core import (
    TERMINAL,
    ActionFeatureMap,
    FeatureMap,
    MdpSim,
    State,
)
from delphi.environments._base import EnvInstance
from delphi.errors import (
    DimensionError,
    InvalidAction,
    InvalidArgument,
    InvalidConfig,
    NoAction,
)
from delphi.util import abbr_str

GAME_OVER = "game-over"
VALUE_SCALE = 9.0 / 8.0


def hamming(x, y):
    """Return the Hamming distance ``½(p − ⟨x, y⟩)`` of two ±1 vectors.

    Examples
    --------
    >>> hamming((1, 1, -1, 1), (1, -1, -1, -1))
    2
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionError(
            f"vectors must have equal length; found {x.shape} and {y.shape}")
    return int((len(x) - int(np.dot(x, y))) // 2)


def g(distance, p):
    """Return ``1 − distance/p``."""
    return 1.0 - distance / p


@dataclass(frozen=True)
class HypercubeState:
    """Position in the phase game.

    Attributes
    ----------
    k : int
        Phase index, ``0..K``.
    i : int
        Steps taken in the current phase.
    s : tuple of int
        Current ±1 vector.
    history : tuple of tuple
        Phase-end vectors ``(s_0, .., s_k)``; ``s_0`` is all ones.
    fix : tuple of int
        Bits flipped in this phase (all ones once frozen).
    frozen : bool
        A late repeat froze the vector until the phase ends.
    game_over : bool
        The walk fell into the game-over state.

    """

    k: int
    i: int
    s: tuple
    history: tuple
    fix: tuple
    frozen: bool = False
    game_over: bool = False

    @property
    def p(self):
        return len(self.s)

    @property
    def ct_flip(self):
        """Hamming distance from the phase start vector."""
        return hamming(self.history[-1], self.s)

    @classmethod
    def start(cls, p):
        ones = (1,) * p
        return cls(0, 0, ones, (ones,), (0,) * p)

    def __repr__(self):
        if self.game_over:
            return "HypercubeState(game over)"
        flag = ", frozen" if self.frozen else ""
        return (f"HypercubeState(k={self.k}, i={self.i}, "
                f"s={abbr_str(self.s)}, fix={abbr_str(self.fix)}{flag})")


def is_admissible(s_star):
    """Return True if ``p/4 ≤ ρ(1⃗, s★) ≤ 3p/4``."""
    s_star = np.asarray(s_star)
    p = len(s_star)
    rho = hamming(np.ones(p, dtype=int), s_star)
    return p / 4 <= rho <= 3 * p / 4


def random_secret(p, rng=None):
    """Draw an admissible secret uniformly by rejection."""
    if p < 2:
        raise InvalidConfig(f"p must be at least 2; found {p}")
    rng = np.random.default_rng(rng)
    while True:
        s_star = tuple(int(x) for x in rng.choice([-1, 1], size=p))
        if is_admissible(s_star):
            return s_star


def _check_secret(s_star, p=None):
    if s_star is None or len(s_star) == 0:
        raise InvalidConfig("secret must be a non-empty ±1 vector")
    s_star = tuple(int(x) for x in s_star)
    if any(x not in (-1, 1) for x in s_star):
        raise InvalidConfig(f"secret must be ±1; found {abbr_str(s_star)}")
    if p is not None and len(s_star) != p:
        raise DimensionError(f"secret must have length {p}")
    return s_star


def _move(state, a):
    """Apply one in-phase move; return None for game over."""
    p = state.p
    if isinstance(a, bool) or not isinstance(a, (int, np.integer)) \
            or not 0 <= a < p:
        raise InvalidAction(f"action must be in range({p}); found {a!r}")
    a = int(a)
    if state.frozen:
        return replace(state, i=state.i + 1)
    if state.fix[a]:
        if state.i < p / 4:
            return None
        return replace(state, i=state.i + 1, fix=(1,) * p, frozen=True)
    s = list(state.s)
    s[a] = -s[a]
    fix = list(state.fix)
    fix[a] = 1
    return replace(state, i=state.i + 1, s=tuple(s), fix=tuple(fix))


def hypercube_transition(state, a, s_star):
    """Return the state after playing bit ``a``.

    A repeat in the first p/4 steps of a phase, or a phase end within
    distance p/4 of ``s_star``, yields a game-over state. A later repeat
    freezes the vector until the phase ends. At a phase end the result is
    the first state of the next phase, with the end vector appended to the
    history.
    """
    if state.game_over:
        raise InvalidArgument("no transitions from the game-over state")
    nxt = _move(state, a)
    if nxt is None:
        return replace(state, game_over=True)
    if nxt.i < nxt.p:
        return nxt
    end = nxt.s
    history = nxt.history + (end,)
    if hamming(end, s_star) <= nxt.p / 4:
        return replace(nxt, history=history, game_over=True)
    return HypercubeState(nxt.k + 1, 0, end, history, (0,) * nxt.p)


def hypercube_reward(history, s_star):
    """Return ``(∏ g(s_{j−1}, s_j)) · g(s_k, s★)`` for phase ends ``s_0..s_k``.

    Examples
    --------
    >>> hypercube_reward([(1, 1, 1, 1)], (-1, -1, 1, 1))
    0.5
    """
    s_star = _check_secret(s_star)
    p = len(s_star)
    value = 1.0
    for prev, cur in zip(history[:-1], history[1:]):
        value *= g(hamming(prev, cur), p)
    return value * g(hamming(history[-1], s_star), p)


def hypercube_expert(state, s_star):
    """Return the expert move: lowest free disagreeing bit, else freeze."""
    if state.game_over:
        raise NoAction("the expert has no action in the game-over state")
    for j, (x, y, f) in enumerate(zip(state.s, s_star, state.fix)):
        if x != y and not f:
            return j
    for j, f in enumerate(state.fix):
        if f:
            return j
    return 0


def _prefix_product(state):
    p = state.p
    value = 1.0
    for prev, cur in zip(state.history[:-1], state.history[1:]):
        value *= g(hamming(prev, cur), p)
    return value


def hypercube_expert_value(state, s_star):
    """Closed-form expert value ``(∏g) · g(ct_flip + e¬fix) · g(e_fix)``."""
    if state.game_over:
        return 0.0
    p = state.p
    s = np.asarray(state.s)
    fix = np.asarray(state.fix, dtype=bool)
    wrong = s != np.asarray(s_star)
    e_fix = int((wrong & fix).sum())
    e_free = int((wrong & ~fix).sum())
    return (_prefix_product(state) * g(state.ct_flip + e_free, p)
            * g(e_fix, p))


def hypercube_value_features(state):
    """Return φ_v of dimension ``1 + p + p²``, zero for game over."""
    p = state.p
    if state.game_over:
        return np.zeros(1 + p + p * p)
    s = np.asarray(state.s, dtype=float)
    fix = np.asarray(state.fix, dtype=float)
    a_prime = 1.0 - 0.5 * fix.sum() / p
    c_prime = 1.0 - (state.ct_flip + 0.5 * (1.0 - fix).sum()) / p
    b_bar = fix * s / (2 * np.sqrt(p))
    d_bar = (1.0 - fix) * s / (2 * np.sqrt(p))
    vec = np.concatenate((
        [a_prime * c_prime],
        c_prime * b_bar + a_prime * d_bar,
        np.outer(b_bar, d_bar).ravel()))
    return _prefix_product(state) * vec / VALUE_SCALE


def hypercube_value_param(s_star):
    """Return θ_v, paired with :func:`hypercube_value_features`."""
    s_star = _check_secret(s_star)
    s_bar = np.asarray(s_star, dtype=float) / np.sqrt(len(s_star))
    return VALUE_SCALE * np.concatenate(
        ([1.0], s_bar, np.outer(s_bar, s_bar).ravel()))


def hypercube_policy_features(state, a):
    """Return φ_π(s, a) = (p ⊕ τ(s, a)) / √(p² + p), dimension ``1 + p``.

    ``τ`` is the vector after the move; a move into the game-over state
    maps to ``−p ⊕ 0``.
    """
    p = state.p
    if state.game_over:
        return np.zeros(1 + p)
    nxt = _move(state, a)
    if nxt is None:
        vec = np.concatenate(([-float(p)], np.zeros(p)))
    else:
        vec = np.concatenate(([float(p)], np.asarray(nxt.s, dtype=float)))
    return vec / np.sqrt(p * p + p)


def hypercube_policy_param(s_star):
    """Return θ_π = (1 ⊕ s★) / √(1 + p)."""
    s_star = _check_secret(s_star)
    vec = np.concatenate(([1.0], np.asarray(s_star, dtype=float)))
    return vec / np.sqrt(1 + len(s_star))


class HypercubeMdp(MdpSim):
    """Hypercube lower-bound MDP with ``p`` actions and horizon ``K·p``.

    The game-over state pads the episode with zero-reward steps up to H.

    Parameters
    ----------
    p : int
        Dimension of the hypercube, at least 2.
    K : int
        Number of phases.
    s_star : array_like, optional
        Admissible ±1 secret; drawn from ``secret_seed`` if None.
    seed : int, optional
        Simulator seed.
    secret_seed : int, optional
        Seed for drawing the secret.
    logger : logging.Logger, optional
        Logger to show messages.

    """

    def __init__(self, p, K, s_star=None, seed=None, secret_seed=None,
                 logger=None):
        if int(p) != p or p < 2:
            raise InvalidConfig(f"p must be an integer ≥ 2; found {p!r}")
        if int(K) != K or K < 1:
            raise InvalidConfig(f"K must be a positive integer; found {K!r}")
        super().__init__(int(K) * int(p), int(p), seed=seed, logger=logger)
        self.p = int(p)
        self.K = int(K)
        if s_star is None:
            s_star = random_secret(self.p, secret_seed)
        self.s_star = _check_secret(s_star, self.p)
        if not is_admissible(self.s_star):
            raise InvalidConfig(
                f"secret {abbr_str(self.s_star)} is not admissible: "
                "need p/4 ≤ ρ(1, s★) ≤ 3p/4")
        self.logger.info("creating %s with p=%d, K=%d",
                         self.__class__.__name__, self.p, self.K)
        self._start_state = State(HypercubeState.start(self.p), 1)
        self._value_fm = None
        self._policy_fm = None

    def __repr__(self):
        return (f"<{self.__class__.__name__}: p={self.p}, K={self.K}, "
                f"s★={abbr_str(self.s_star)} />")

    def _wrap(self, hs, h):
        if h > self.horizon:
            return State(TERMINAL, h)
        if hs.game_over:
            return State(GAME_OVER, h)
        return State(hs, h)

    def _game_over_state(self, h):
        if h > self.horizon:
            return State(TERMINAL, h)
        return State(GAME_OVER, h)

    def _resolve(self, state, a):
        """Return (reward mean, Bernoulli flag, next State)."""
        h = state.h
        if state.key == GAME_OVER:
            if not 0 <= a < self.p:
                raise InvalidAction(f"action must be in range({self.p})")
            return 0.0, False, self._game_over_state(h + 1)
        hs = state.key
        nxt = hypercube_transition(hs, a, self.s_star)
        mean, bern = 0.0, False
        if hs.i == self.p - 1 and (nxt.game_over or nxt.k == self.K):
            if len(nxt.history) > len(hs.history):
                mean = hypercube_reward(nxt.history, self.s_star)
                bern = hs.k + 1 == self.K
        return mean, bern, self._wrap(nxt, h + 1)

    def _draw_start(self, rng):
        return self._start_state

    def _draw(self, state, a, n, rng):
        mean, bern, nxt = self._resolve(state, a)
        if bern:
            rewards = (rng.random(n) < mean).astype(float)
        else:
            rewards = np.full(n, mean)
        return rewards, [nxt], np.array([n])

    def _start_outcomes(self):
        return [(1.0, self._start_state)]

    def _outcomes(self, state, a):
        mean, bern, nxt = self._resolve(state, a)
        if not bern:
            return [(1.0, mean, nxt)]
        res = []
        if mean > 0:
            res.append((mean, 1.0, nxt))
        if mean < 1:
            res.append((1.0 - mean, 0.0, nxt))
        return res

    def expert_action(self, state):
        """Expert action at a simulator State."""
        if state.key in (GAME_OVER, TERMINAL):
            raise NoAction(f"the expert has no action at {state!r}")
        return hypercube_expert(state.key, self.s_star)

    def expert_value(self, state):
        """Closed-form expert value at a simulator State."""
        if state.key in (GAME_OVER, TERMINAL):
            return 0.0
        return hypercube_expert_value(state.key, self.s_star)

    @property
    def value_feature_map(self):
        """FeatureMap of dimension ``1 + p + p²``."""
        if self._value_fm is None:
            d = 1 + self.p + self.p ** 2

            def func(state):
                if state.key == GAME_OVER:
                    return np.zeros(d)
                return hypercube_value_features(state.key)

            self._value_fm = FeatureMap(d, self.horizon, func, "hypercube-v")
        return self._value_fm

    @property
    def policy_feature_map(self):
        """ActionFeatureMap of dimension ``1 + p``."""
        if self._policy_fm is None:
            d = 1 + self.p

            def func(state, a):
                if state.key == GAME_OVER:
                    return np.zeros(d)
                return hypercube_policy_features(state.key, a)

            self._policy_fm = ActionFeatureMap(
                d, self.horizon, func, "hypercube-pi")
        return self._policy_fm


def hypercube_instance(p, K, s_star=None, seed=None, secret_seed=None,
                       feature_kind="value", logger=None):
    """Build an EnvInstance of the hypercube MDP.

    Parameters
    ----------
    p, K : int
        Dimension and number of phases.
    s_star : array_like, optional
        Secret; drawn from ``secret_seed`` if None.
    seed : int, optional
        Simulator seed.
    secret_seed : int, optional
        Seed for drawing the secret.
    feature_kind : {"value", "policy"}, default "value"
        Which feature construction to attach.
    logger : logging.Logger, optional
        Logger to show messages.

    """
    mdp = HypercubeMdp(p, K, s_star, seed=seed, secret_seed=secret_seed,
                       logger=logger)
    if feature_kind == "value":
        features = mdp.value_feature_map
        theta = hypercube_value_param(mdp.s_star)
    elif feature_kind == "policy":
        features = mdp.policy_feature_map
        theta = hypercube_policy_param(mdp.s_star)
    else:
        raise InvalidConfig(
            f"feature_kind must be 'value' or 'policy'; found {feature_kind!r}")
    meta = {"kind": "hypercube", "p": mdp.p, "K": mdp.K,
            "s_star": list(mdp.s_star), "feature_kind": feature_kind,
            "value_scale": VALUE_SCALE}
    return EnvInstance(mdp, features, mdp.expert_action, theta, meta)
