"""Core functionality: episodic simulators, states and feature maps."""

__all__ = [
    "State",
    "Transition",
    "FeatureMap",
    "ActionFeatureMap",
    "MdpSim",
    "TabularMdp",
    "TERMINAL",
]

import copy
import pickle
from dataclasses import dataclass
from itertools import zip_longest
from textwrap import dedent

import numpy as np

from delphi.errors import (
    InvalidAction,
    InvalidArgument,
    InvalidConfig,
    NoCheckpoint,
    TerminalStep,
    UnknownState,
    Unsupported,
)
from delphi.logger import check_logger
from delphi.util import abbr_str, as_vector

TERMINAL = "terminal"
NORM_SLACK = 1e-9


@dataclass(frozen=True)
class State:
    """Simulator state: an opaque hashable ``key`` and horizon index ``h``.

    Horizon indices run ``1..H`` for decision layers, ``H + 1`` is the
    absorbing terminal layer.
    """

    key: object
    h: int

    def __repr__(self):
        return f"State({self.key!r}, h={self.h})"


@dataclass(frozen=True)
class Transition:
    """One observed step of a simulator."""

    state: State
    action: int
    reward: float
    next_state: State


class FeatureMap:
    """State features of dimension ``d``.

    Terminal-layer states map to the zero vector. Features of every other
    state must satisfy ``‖φ(s)‖₂ ≤ 1``; evaluations are cached.

    Parameters
    ----------
    d : int
        Feature dimension.
    horizon : int
        Horizon H of the simulator the features belong to.
    func : callable
        ``func(state)`` returns a length ``d`` vector, raising ``KeyError``
        for unknown states.
    name : str, optional
        Label used in ``repr``.

    """

    def __init__(self, d, horizon, func, name=None):
        if int(d) != d or d < 1:
            raise ValueError(f"d must be a positive integer; found {d!r}")
        self.d = int(d)
        self.horizon = int(horizon)
        self.func = func
        self.name = name or getattr(func, "__name__", "features")
        self._cache = {}
        self._zero = np.zeros(self.d)
        self._zero.flags.writeable = False

    def __repr__(self):
        return f"<{self.__class__.__name__}: {self.name}, d={self.d} />"

    def __call__(self, state):
        """Return φ(state) as a read-only array."""
        if state.h == self.horizon + 1:
            return self._zero
        try:
            return self._cache[state]
        except KeyError:
            pass
        try:
            vec = self.func(state)
        except KeyError as err:
            raise UnknownState(f"no features for {state!r}") from err
        vec = np.array(as_vector(vec, self.d, "features"))
        norm = np.linalg.norm(vec)
        if norm > 1.0 + NORM_SLACK:
            raise ValueError(f"feature norm {norm:.6g} > 1 at {state!r}")
        vec.flags.writeable = False
        self._cache[state] = vec
        return vec

    @classmethod
    def from_table(cls, table, horizon, name="table"):
        """Create from a mapping of State to vector."""
        table = dict(table)
        if not table:
            raise ValueError("feature table is empty")
        d = len(next(iter(table.values())))
        return cls(d, horizon, table.__getitem__, name)


class ActionFeatureMap(FeatureMap):
    """State-action features φ(s, a) of dimension ``d``."""

    def __call__(self, state, a):
        """Return φ(state, a) as a read-only array."""
        if state.h == self.horizon + 1:
            return self._zero
        key = (state, a)
        try:
            return self._cache[key]
        except KeyError:
            pass
        try:
            vec = self.func(state, a)
        except KeyError as err:
            raise UnknownState(f"no features for {state!r}, {a}") from err
        vec = np.array(as_vector(vec, self.d, "features"))
        norm = np.linalg.norm(vec)
        if norm > 1.0 + NORM_SLACK:
            raise ValueError(
                f"feature norm {norm:.6g} > 1 at {state!r}, action {a}")
        vec.flags.writeable = False
        self._cache[key] = vec
        return vec

    @classmethod
    def from_table(cls, table, horizon, name="table"):
        """Create from a mapping of (State, action) to vector."""
        table = dict(table)
        if not table:
            raise ValueError("feature table is empty")
        d = len(next(iter(table.values())))
        return cls(d, horizon, lambda s, a: table[(s, a)], name)


class MdpSim:
    """Episodic finite-horizon simulator with a one-deep checkpoint.

    Subclasses implement ``_draw_start`` and ``_draw``; enumerable
    simulators also implement ``_start_outcomes`` and ``_outcomes``.

    Attributes
    ----------
    horizon : int
        Number of decision layers H.
    action_count : int
        Number of actions A, indexed ``0..A-1``.
    sample_count : int
        Number of exploratory samples (steps) drawn so far.
    restart_count : int
        Number of restarts, counted apart from samples.
    reward_range : tuple
        Bounds every emitted reward must lie within.
    logger : logging.Logger
        Logger to show messages.

    """

    reward_range = (0.0, 1.0)

    def __init__(self, horizon, action_count, seed=None, logger=None):
        check_logger(self, logger)
        if int(horizon) != horizon or horizon < 1:
            raise ValueError(
                f"horizon must be a positive integer; found {horizon!r}")
        if int(action_count) != action_count or action_count < 1:
            raise ValueError(
                "action_count must be a positive integer; "
                f"found {action_count!r}")
        self.horizon = int(horizon)
        self.action_count = int(action_count)
        self.seed = seed
        self._seed_seq = np.random.SeedSequence(seed)
        self.rng = np.random.Generator(np.random.Philox(self._seed_seq))
        self.sample_count = 0
        self.restart_count = 0
        self.last_transition = None
        self._state = None
        self._checkpoint = None

    def __repr__(self):
        return dedent(f'''\
            <{self.__class__.__name__}: H={self.horizon}, A={self.action_count}
              current: {self._state!r}
              samples: {self.sample_count}, restarts: {self.restart_count} />''')

    # hooks

    def _draw_start(self, rng):
        raise NotImplementedError

    def _draw(self, state, a, n, rng):
        """Draw ``n`` transitions; return (rewards, successors, counts)."""
        raise NotImplementedError

    def _start_outcomes(self):
        raise Unsupported(
            f"{self.__class__.__name__} does not expose its start table")

    def _outcomes(self, state, a):
        raise Unsupported(
            f"{self.__class__.__name__} does not expose its tables")

    # public interface

    @property
    def current_state(self):
        """State the next step is taken from."""
        if self._state is None:
            self.restart()
        return self._state

    @property
    def checkpoint(self):
        """State before the most recent step, or None."""
        return self._checkpoint

    def is_terminal(self, state):
        """Return True if ``state`` is in the terminal layer."""
        return state.h > self.horizon

    def _check_action(self, a):
        if not (isinstance(a, (int, np.integer))
                and 0 <= a < self.action_count):
            raise InvalidAction(
                f"action must be in range({self.action_count}); found {a!r}")

    def _check_rewards(self, rewards):
        lo, hi = self.reward_range
        if np.any(rewards < lo) or np.any(rewards > hi):
            raise ValueError(
                f"reward outside [{lo}, {hi}]: {abbr_str(rewards, 6)}")

    def step(self, a):
        """Take action ``a``; return (reward, next state)."""
        state = self.current_state
        self._check_action(a)
        if self.is_terminal(state):
            raise TerminalStep(f"cannot step from terminal {state!r}")
        rewards, successors, _ = self._draw(state, a, 1, self.rng)
        self._check_rewards(rewards)
        reward = float(rewards[0])
        nxt = successors[0]
        self.sample_count += 1
        self._checkpoint = state
        self._state = nxt
        self.last_transition = Transition(state, int(a), reward, nxt)
        return reward, nxt

    def sample(self, a, n):
        """Draw ``n`` step/reset pairs of action ``a`` from the current state.

        The simulator stays at the current state, which becomes the
        checkpoint, and ``sample_count`` grows by ``n``.

        Returns
        -------
        rewards : numpy.ndarray
            The ``n`` rewards.
        successors : list of State
            Distinct next states observed.
        counts : numpy.ndarray
            How many of the ``n`` draws reached each successor.

        """
        if int(n) != n or n < 1:
            raise InvalidArgument(f"n must be a positive integer; found {n!r}")
        state = self.current_state
        self._check_action(a)
        if self.is_terminal(state):
            raise TerminalStep(f"cannot step from terminal {state!r}")
        rewards, successors, counts = self._draw(state, a, int(n), self.rng)
        self._check_rewards(rewards)
        self.sample_count += int(n)
        self._checkpoint = state
        return rewards, successors, counts

    def reset_to_checkpoint(self):
        """Return to the state the last step was taken from."""
        if self._checkpoint is None:
            raise NoCheckpoint("no step since the last restart")
        self._state = self._checkpoint
        return self._state

    def restart(self):
        """Begin a fresh episode from the start distribution."""
        self._state = self._draw_start(self.rng)
        self._checkpoint = None
        self.restart_count += 1
        return self._state

    def clone(self):
        """Return a copy positioned identically with a forked random stream."""
        other = copy.copy(self)
        other._seed_seq = self._seed_seq.spawn(1)[0]
        other.rng = np.random.Generator(np.random.Philox(other._seed_seq))
        other.sample_count = 0
        other.restart_count = 0
        return other

    def reseed(self, *key):
        """Derive the random stream from the master seed and ``key``."""
        seq = np.random.SeedSequence(
            self._seed_seq.entropy,
            spawn_key=self._seed_seq.spawn_key + tuple(int(k) for k in key))
        self.rng = np.random.Generator(np.random.Philox(seq))

    def start_outcomes(self):
        """Return list of (probability, start state)."""
        return self._start_outcomes()

    def outcomes(self, state, a):
        """Return list of (probability, reward, next state) for ``(state, a)``.

        Raises Unsupported for sample-only simulators.
        """
        self._check_action(a)
        if self.is_terminal(state):
            raise TerminalStep(f"no outcomes from terminal {state!r}")
        return self._outcomes(state, a)

    @property
    def is_enumerable(self):
        """True if exact outcome tables are available."""
        try:
            self.start_outcomes()
        except Unsupported:
            return False
        return True

    @property
    def has_deterministic_start(self):
        """True if the start distribution is a single state."""
        try:
            return len(self.start_outcomes()) == 1
        except Unsupported:
            return False

    def enumerate_states(self):
        """Return dict of horizon index to list of reachable states.

        Includes the terminal layer ``H + 1``; order is discovery order.
        """
        layers = {h: {} for h in range(1, self.horizon + 2)}
        for prob, state in self.start_outcomes():
            layers[1][state] = None
        for h in range(1, self.horizon + 1):
            for state in layers[h]:
                for a in range(self.action_count):
                    for _, _, nxt in self.outcomes(state, a):
                        layers[h + 1][nxt] = None
        return {h: list(states) for h, states in layers.items()}


class TabularMdp(MdpSim):
    """Layered tabular MDP with explicit transition and reward tables.

    Parameters
    ----------
    states : list of list
        State keys for each decision layer ``h = 1..H``.
    transitions : list of array_like
        Layer ``h`` array has shape (n_h, A, n_{h+1}); for the last layer
        n_{H+1} is 1 (the terminal state).
    rewards : list of array_like
        Mean rewards, layer ``h`` array has shape (n_h, A).
    start : array_like
        Start distribution over layer 1.
    bernoulli : list of array_like, optional
        Boolean arrays flagging Bernoulli rewards; default deterministic.
    features : list of array_like, optional
        Layer ``h`` array has shape (n_h, d); exposed as ``feature_map``.
    reward_range : tuple, optional
        Allowed reward bounds, default (0, 1).
    seed : int, optional
        Seed for the simulator random stream.
    logger : logging.Logger, optional
        Logger to show messages.

    """

    def __init__(self, states, transitions, rewards, start, bernoulli=None,
                 features=None, reward_range=(0.0, 1.0), seed=None,
                 logger=None):
        states = [list(layer) for layer in states]
        H = len(states)
        if H < 1:
            raise InvalidConfig("at least one layer of states is required")
        transitions = [np.asarray(p, dtype=float) for p in transitions]
        if len(transitions) != H or transitions[0].ndim != 3:
            raise InvalidConfig(
                "expected one (n_h, A, n_next) transition array per layer")
        A = transitions[0].shape[1]
        super().__init__(H, A, seed=seed, logger=logger)
        self.logger.info("creating new %s object", self.__class__.__name__)
        self.reward_range = tuple(float(x) for x in reward_range)
        rewards = [np.asarray(r, dtype=float) for r in rewards]
        if bernoulli is None:
            bernoulli = [np.zeros(r.shape, dtype=bool) for r in rewards]
        bernoulli = [np.asarray(b, dtype=bool) for b in bernoulli]
        self._states = states
        self._P = transitions
        self._R = rewards
        self._bernoulli = bernoulli
        self._start = np.asarray(start, dtype=float)
        self._phi = None
        if features is not None:
            self._phi = [np.asarray(f, dtype=float) for f in features]
        self._validate()
        self._cum = [np.cumsum(p, axis=2) for p in self._P]
        self._start_cum = np.cumsum(self._start)
        self._index = {}
        for h, layer in enumerate(states, 1):
            for i, key in enumerate(layer):
                self._index[State(key, h)] = i
        self._terminal = State(TERMINAL, H + 1)
        self._feature_map = None

    def _validate(self):
        H, A = self.horizon, self.action_count
        lo, hi = self.reward_range
        for h, layer in enumerate(self._states, 1):
            n_h = len(layer)
            n_next = len(self._states[h]) if h < H else 1
            if len(set(layer)) != n_h:
                raise InvalidConfig(f"duplicate state keys in layer {h}")
            P = self._P[h - 1]
            if P.shape != (n_h, A, n_next):
                raise InvalidConfig(
                    f"layer {h} transitions must have shape "
                    f"{(n_h, A, n_next)}; found {P.shape}")
            if (P < 0).any() or not np.allclose(P.sum(axis=2), 1.0,
                                                atol=1e-9):
                raise InvalidConfig(
                    f"layer {h} transition rows must be probability vectors")
            R = self._R[h - 1]
            B = self._bernoulli[h - 1]
            if R.shape != (n_h, A) or B.shape != (n_h, A):
                raise InvalidConfig(
                    f"layer {h} rewards must have shape {(n_h, A)}")
            if (R < lo).any() or (R > hi).any():
                raise InvalidConfig(
                    f"layer {h} rewards outside [{lo}, {hi}]")
            if ((R[B] < 0) | (R[B] > 1)).any() or (B.any() and (lo > 0
                                                            or hi < 1)):
                raise InvalidConfig(
                    f"layer {h} Bernoulli means must be in [0, 1]")
            if self._phi is not None:
                phi = self._phi[h - 1]
                if phi.ndim != 2 or phi.shape[0] != n_h:
                    raise InvalidConfig(
                        f"layer {h} features must have {n_h} rows")
                if phi.shape[1] != self._phi[0].shape[1]:
                    raise InvalidConfig("feature dimension differs by layer")
                if (np.linalg.norm(phi, axis=1) > 1 + NORM_SLACK).any():
                    raise InvalidConfig(f"layer {h} feature norm exceeds 1")
        if self._start.shape != (len(self._states[0]),):
            raise InvalidConfig("start distribution must cover layer 1")
        if (self._start < 0).any() or abs(self._start.sum() - 1) > 1e-9:
            raise InvalidConfig("start must be a probability vector")

    def __repr__(self):
        counts = [len(layer) for layer in self._states]
        d = "no features" if self._phi is None else f"d={self.d}"
        return dedent(f'''\
            <{self.__class__.__name__}: H={self.horizon}, A={self.action_count}, {d}
              {sum(counts)} states per layer: {abbr_str(counts, 6)}
              layer 1: {abbr_str(self._states[0], 6)} />''')

    def __eq__(self, other):
        """Return true if objects are equal."""
        try:
            for (ak, av), (bk, bv) in zip_longest(iter(self), iter(other)):
                if ak != bk:
                    return False
                if isinstance(av, list) and av and isinstance(
                        av[0], np.ndarray):
                    assert len(av) == len(bv)
                    for x, y in zip(av, bv):
                        np.testing.assert_array_equal(x, y)
                elif isinstance(av, np.ndarray):
                    np.testing.assert_array_equal(av, bv)
                else:
                    assert av == bv
            return True
        except (AssertionError, TypeError, ValueError):
            return False

    def __iter__(self):
        """Return object datasets with an iterator."""
        yield "class", self.__class__.__name__
        yield "states", self._states
        yield "transitions", self._P
        yield "rewards", self._R
        yield "bernoulli", self._bernoulli
        yield "start", self._start
        yield "features", self._phi
        yield "reward_range", self.reward_range
        yield "seed", self.seed

    def __getstate__(self):
        """Serialize object attributes for pickle dumps."""
        return dict(self)

    def __setstate__(self, state):
        """Set object attributes from pickle loads."""
        if not isinstance(state, dict):
            raise ValueError(f"expected 'dict'; found {type(state)!r}")
        elif "class" not in state:
            raise KeyError("state does not have 'class' key")
        elif state["class"] != self.__class__.__name__:
            raise ValueError("expected state class {!r}; found {!r}"
                             .format(self.__class__.__name__, state["class"]))
        self.__init__(
            state["states"], state["transitions"], state["rewards"],
            state["start"], bernoulli=state["bernoulli"],
            features=state["features"], reward_range=state["reward_range"],
            seed=state["seed"])

    def to_pickle(self, path, protocol=pickle.HIGHEST_PROTOCOL):
        """Pickle (serialize) object to file.

        See also
        --------
        TabularMdp.from_pickle : Read file.
        """
        with open(path, "wb") as f:
            pickle.dump(self, f, protocol=protocol)

    @classmethod
    def from_pickle(cls, path):
        """Read a pickled format from a file.

        See also
        --------
        TabularMdp.to_pickle : Save file.
        """
        with open(path, "rb") as f:
            obj = pickle.load(f)
        return obj

    # tables

    def _locate(self, state):
        try:
            return self._index[state]
        except KeyError:
            raise UnknownState(f"{state!r} is not a state of this MDP")

    def _layer_state(self, h, j):
        if h > self.horizon:
            return self._terminal
        return State(self._states[h - 1][j], h)

    def states(self, h):
        """Return list of states in layer ``h`` (``H + 1`` is terminal)."""
        if h == self.horizon + 1:
            return [self._terminal]
        return [State(key, h) for key in self._states[h - 1]]

    @property
    def n_states(self):
        """Number of non-terminal states."""
        return sum(len(layer) for layer in self._states)

    @property
    def d(self):
        """Feature dimension, or None without features."""
        if self._phi is None:
            return None
        return self._phi[0].shape[1]

    @property
    def feature_map(self):
        """FeatureMap built from the feature tables."""
        if self._phi is None:
            raise AttributeError("this MDP has no feature table")
        if self._feature_map is None:
            self._feature_map = FeatureMap(
                self.d, self.horizon,
                lambda s: self._phi[s.h - 1][self._index[s]], "tabular")
        return self._feature_map

    @property
    def deterministic_transitions(self):
        """True if every (state, action) has a single successor."""
        return all(((p > 0).sum(axis=2) == 1).all() for p in self._P)

    @property
    def deterministic(self):
        """True if transitions and rewards are both deterministic."""
        return self.deterministic_transitions and not any(
            b.any() for b in self._bernoulli)

    def reward_mean(self, state, a):
        """Mean reward of ``(state, a)``."""
        return float(self._R[state.h - 1][self._locate(state), a])

    def transition_probs(self, state, a):
        """Return (successor states, probabilities) of ``(state, a)``."""
        i = self._locate(state)
        probs = self._P[state.h - 1][i, a]
        nz = np.flatnonzero(probs)
        return [self._layer_state(state.h + 1, j) for j in nz], probs[nz]

    def enumerate_states(self):
        """Return dict of horizon index to all states, reachable or not."""
        return {h: self.states(h) for h in range(1, self.horizon + 2)}

    # hooks

    def _draw_start(self, rng):
        j = int(np.searchsorted(self._start_cum, rng.random(), side="right"))
        j = min(j, len(self._start) - 1)
        return State(self._states[0][j], 1)

    def _draw(self, state, a, n, rng):
        i = self._locate(state)
        h = state.h
        cum = self._cum[h - 1][i, a]
        idx = np.searchsorted(cum, rng.random(n), side="right")
        np.minimum(idx, len(cum) - 1, out=idx)
        mean = self._R[h - 1][i, a]
        if self._bernoulli[h - 1][i, a]:
            rewards = (rng.random(n) < mean).astype(float)
        else:
            rewards = np.full(n, mean)
        counts = np.bincount(idx, minlength=len(cum))
        nz = np.flatnonzero(counts)
        successors = [self._layer_state(h + 1, j) for j in nz]
        return rewards, successors, counts[nz]

    def _start_outcomes(self):
        return [(float(p), State(key, 1))
                for key, p in zip(self._states[0], self._start) if p > 0]

    def _outcomes(self, state, a):
        i = self._locate(state)
        h = state.h
        mean = float(self._R[h - 1][i, a])
        bern = self._bernoulli[h - 1][i, a]
        res = []
        for j, p in enumerate(self._P[h - 1][i, a]):
            if p <= 0:
                continue
            nxt = self._layer_state(h + 1, j)
            if bern:
                if mean > 0:
                    res.append((p * mean, 1.0, nxt))
                if mean < 1:
                    res.append((p * (1 - mean), 0.0, nxt))
            else:
                res.append((float(p), mean, nxt))
        return res

    # serialization

    def to_dict(self):
        """Return a JSON-ready dict of the tabular schema."""
        H = self.horizon
        doc = {"H": H, "A": self.action_count, "states": self._states}
        P, r, phi = {}, {}, {}
        for h, layer in enumerate(self._states, 1):
            for i, key in enumerate(layer):
                name = str(key)
                if h < H:
                    P[name] = self._P[h - 1][i].tolist()
                r[name] = [
                    {"mean": float(m),
                     "kind": "bernoulli" if b else "deterministic"}
                    for m, b in zip(self._R[h - 1][i],
                                    self._bernoulli[h - 1][i])]
                if self._phi is not None:
                    phi[name] = self._phi[h - 1][i].tolist()
        doc["P"] = P
        doc["r"] = r
        if self._phi is not None:
            doc["phi"] = phi
        doc["start"] = {str(k): float(p)
                        for k, p in zip(self._states[0], self._start)}
        if self.reward_range != (0.0, 1.0):
            doc["reward_range"] = list(self.reward_range)
        return doc

    @classmethod
    def from_dict(cls, doc, seed=None, logger=None):
        """Create from a dict of the tabular schema.

        Examples
        --------
        >>> from delphi import TabularMdp
        >>> mdp = TabularMdp.from_dict({
        ...     "H": 1, "A": 2, "states": [["s"]],
        ...     "r": {"s": [{"mean": 0.2, "kind": "deterministic"},
        ...                 {"mean": 0.8, "kind": "bernoulli"}]},
        ...     "start": {"s": 1.0}})
        >>> mdp.reward_mean(mdp.restart(), 1)
        0.8

        """
        try:
            H = int(doc["H"])
            A = int(doc["A"])
            states = [[str(k) for k in layer] for layer in doc["states"]]
            if len(states) != H:
                raise InvalidConfig(f"expected {H} layers of states")
            names = [k for layer in states for k in layer]
            if len(set(names)) != len(names):
                raise InvalidConfig("state names must be unique")
            transitions, rewards, bernoulli, features = [], [], [], []
            for h, layer in enumerate(states, 1):
                n_next = len(states[h]) if h < H else 1
                P = np.empty((len(layer), A, n_next))
                R = np.empty((len(layer), A))
                B = np.zeros((len(layer), A), dtype=bool)
                for i, name in enumerate(layer):
                    if h < H:
                        P[i] = np.asarray(doc["P"][name], dtype=float)
                    else:
                        P[i] = 1.0
                    entries = doc["r"][name]
                    if len(entries) != A:
                        raise InvalidConfig(
                            f"state {name!r} needs {A} reward entries")
                    for a, entry in enumerate(entries):
                        R[i, a] = float(entry["mean"])
                        kind = entry.get("kind", "deterministic")
                        if kind not in ("deterministic", "bernoulli"):
                            raise InvalidConfig(
                                f"unknown reward kind {kind!r}")
                        B[i, a] = kind == "bernoulli"
                transitions.append(P)
                rewards.append(R)
                bernoulli.append(B)
                if "phi" in doc:
                    features.append(
                        np.array([doc["phi"][name] for name in layer],
                                 dtype=float))
            start = [float(doc["start"].get(name, 0.0)) for name in states[0]]
            reward_range = tuple(doc.get("reward_range", (0.0, 1.0)))
        except (KeyError, TypeError, ValueError) as err:
            if isinstance(err, InvalidConfig):
                raise
            raise InvalidConfig(f"malformed tabular MDP document: {err}")
        return cls(states, transitions, rewards, start, bernoulli=bernoulli,
                   features=features or None, reward_range=reward_range,
                   seed=seed, logger=logger)
