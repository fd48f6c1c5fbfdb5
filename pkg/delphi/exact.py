"""Exact values by backward induction, and Eluder-sequence verification."""

__all__ = [
    "EluderCheck",
    "ValueTable",
    "check_delphi_eluder",
    "exact_optimal",
    "exact_value",
    "realizing_parameter",
    "verify_eluder_sequence",
]

from collections.abc import Mapping
from typing import NamedTuple

import numpy as np
import pandas as pd

from delphi.errors import DimensionError, InvalidArgument, NoAction, Unsupported
from delphi.util import as_vector

TIE_TOL = 1e-12


class ValueTable:
    """State values, state-action values and the policy they belong to.

    Attributes
    ----------
    v : dict
        State to value; terminal states map to 0.
    q : dict
        (State, action) to value.
    policy : dict
        State to the action the values were computed for.
    layers : dict
        Horizon index to list of states.

    """

    def __init__(self, v, q, policy, layers):
        self.v = v
        self.q = q
        self.policy = policy
        self.layers = layers

    def __repr__(self):
        n = sum(len(states) for states in self.layers.values())
        return f"<{self.__class__.__name__}: {n} states />"

    def __getitem__(self, state):
        return self.v[state]

    @property
    def start_states(self):
        return self.layers[1]

    def to_frame(self):
        """Return a DataFrame with one row per non-terminal state."""
        rows = []
        for h, states in self.layers.items():
            for s in states:
                if s not in self.policy:
                    continue
                rows.append({"h": h, "state": repr(s), "v": self.v[s],
                             "action": self.policy[s]})
        return pd.DataFrame(rows, columns=["h", "state", "v", "action"])

    def max_bellman_residual(self, sim):
        """Return max |v(s) − r(s, π(s)) − ⟨P(s, π(s)), v⟩| over states."""
        worst = 0.0
        for s, a in self.policy.items():
            backup = sum(p * (r + self.v[nxt])
                         for p, r, nxt in sim.outcomes(s, a))
            worst = max(worst, abs(self.v[s] - backup))
        return worst


def _layers(sim):
    if not sim.is_enumerable:
        raise Unsupported(
            f"{sim.__class__.__name__} does not expose its tables")
    return sim.enumerate_states()


def _policy_action(policy, state):
    if isinstance(policy, Mapping):
        return policy[state]
    return policy(state)


def _backward(sim, choose):
    layers = _layers(sim)
    H = sim.horizon
    v = {s: 0.0 for s in layers[H + 1]}
    q = {}
    policy = {}
    for h in range(H, 0, -1):
        for s in layers[h]:
            values = []
            for a in range(sim.action_count):
                value = 0.0
                for p, r, nxt in sim.outcomes(s, a):
                    value += p * (r + v.get(nxt, 0.0))
                q[s, a] = value
                values.append(value)
            a = choose(s, values)
            policy[s] = a
            v[s] = values[a]
    return ValueTable(v, q, policy, layers)


def exact_value(sim, policy):
    """Evaluate ``policy`` exactly on every reachable state.

    Parameters
    ----------
    sim : MdpSim
        Enumerable simulator.
    policy : mapping or callable
        State to action. Where the policy raises NoAction (the expert does
        at game-over states) action 0 is played; a mapping must hold
        every other reachable state.

    Returns
    -------
    ValueTable

    """
    def choose(state, values):
        try:
            return int(_policy_action(policy, state))
        except NoAction:
            return 0
        except KeyError as e:
            raise InvalidArgument(
                f"policy has no action for reachable {state!r}") from e

    return _backward(sim, choose)


def exact_optimal(sim):
    """Return the optimal ValueTable; ties go to the lowest action index."""
    def choose(state, values):
        best = max(values)
        for a, value in enumerate(values):
            if value >= best - TIE_TOL:
                return a

    return _backward(sim, choose)


def realizing_parameter(sim, fm, policy):
    """Least-squares fit of ``φθ = v^π`` over reachable non-terminal states.

    Returns
    -------
    theta : numpy.ndarray
        The fitted parameter.
    eta : float
        Sup error ``max_s |v^π(s) − ⟨φ(s), θ⟩|``, the misspecification.

    """
    table = exact_value(sim, policy)
    states = [s for h in range(1, sim.horizon + 1) for s in table.layers[h]]
    Phi = np.array([fm(s) for s in states])
    v = np.array([table.v[s] for s in states])
    theta, *_ = np.linalg.lstsq(Phi, v, rcond=None)
    eta = float(np.max(np.abs(Phi @ theta - v))) if len(v) else 0.0
    return theta, eta


class EluderCheck(NamedTuple):
    """Outcome of an Eluder-sequence verification."""

    ok: bool
    first_violation: int = None

    def __bool__(self):
        return self.ok


def verify_eluder_sequence(points, params, theta_star, eps):
    """Check that ``points`` form an ε-Eluder sequence for ``f_θ = ⟨1 ⊕ θ, x⟩``.

    Each point must be fitted by its own parameter far from ``theta_star``,
    ``|f_i(x_i) − f★(x_i)| > ε``, while agreeing on the history,
    ``Σ_{j<i} (f_i(x_j) − f★(x_j))² ≤ ε²``.

    Returns
    -------
    EluderCheck
        ``first_violation`` is the 0-based index of the first failing point.

    Examples
    --------
    >>> verify_eluder_sequence([], [], [0.0, 0.0], 0.1).ok
    True
    """
    if len(points) != len(params):
        raise DimensionError(
            f"{len(points)} points but {len(params)} parameters")
    theta_star = as_vector(theta_star, name="theta_star")
    d = len(theta_star)
    X = np.array([as_vector(x, d + 1, "point") for x in points]).reshape(
        -1, d + 1)[:, 1:]
    for i, theta in enumerate(params):
        diff = as_vector(theta, d, "theta") - theta_star
        gaps = X[:i + 1] @ diff
        if not abs(gaps[i]) > eps:
            return EluderCheck(False, i)
        if np.sum(gaps[:i] ** 2) > eps ** 2:
            return EluderCheck(False, i)
    return EluderCheck(True)


def check_delphi_eluder(stats, theta_star, eps):
    """Verify that a run's constraints form an Eluder sequence at scale ``eps``.

    Each constraint's refined TD vector is paired with the parameter the
    driver used in the iteration that produced it.
    """
    space = getattr(stats, "constraints", None)
    if space is None:
        raise InvalidArgument("run has no constraint dump")
    thetas = {rec["t"]: rec["theta"] for rec in stats.records}
    points, params = [], []
    for con in space.constraints:
        if con.iteration not in thetas:
            raise InvalidArgument(
                f"no parameter recorded for iteration {con.iteration}")
        points.append(con.td.values)
        params.append(thetas[con.iteration])
    return verify_eluder_sequence(points, params, theta_star, eps)
