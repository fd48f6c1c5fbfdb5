"""Tabular sanity environments with exactly linear expert values."""

__all__ = [
    "bandit_mdp",
    "chain_mdp",
    "one_hot_action_features",
    "one_hot_features",
    "random_tabular_mdp",
]

import numpy as np

from delphi.core import ActionFeatureMap, FeatureMap, TabularMdp
from delphi.environments._base import EnvInstance
from delphi.errors import InvalidArgument


def _state_order(mdp):
    return [s for h in range(1, mdp.horizon + 1) for s in mdp.states(h)]


def one_hot_features(mdp):
    """Return one-hot state features, ``d`` = number of non-terminal states.

    Coordinates follow layer order, then the order of keys in each layer.
    """
    order = {s: k for k, s in enumerate(_state_order(mdp))}
    d = len(order)

    def func(state):
        vec = np.zeros(d)
        vec[order[state]] = 1.0
        return vec

    return FeatureMap(d, mdp.horizon, func, "one-hot")


def one_hot_action_features(mdp):
    """Return one-hot state-action features, ``d = |S|·A``."""
    order = {s: k for k, s in enumerate(_state_order(mdp))}
    A = mdp.action_count
    d = len(order) * A

    def func(state, a):
        vec = np.zeros(d)
        vec[order[state] * A + a] = 1.0
        return vec

    return ActionFeatureMap(d, mdp.horizon, func, "one-hot")


def _expert_tables(mdp, policy):
    """Return (v, q) dicts of ``policy`` by backward induction."""
    v = {s: 0.0 for s in mdp.states(mdp.horizon + 1)}
    q = {}
    for h in range(mdp.horizon, 0, -1):
        for s in mdp.states(h):
            for a in range(mdp.action_count):
                nxt, probs = mdp.transition_probs(s, a)
                q[s, a] = mdp.reward_mean(s, a) + sum(
                    p * v[n] for p, n in zip(probs, nxt))
            v[s] = q[s, policy[s]]
    return v, q


def _instance(mdp, policy, **meta):
    v, q = _expert_tables(mdp, policy)
    order = _state_order(mdp)
    theta = np.array([v[s] for s in order])
    theta_q = np.array(
        [q[s, a] for s in order for a in range(mdp.action_count)])
    meta.update(v=v, q=q, q_theta=theta_q)
    return EnvInstance(mdp, one_hot_features(mdp), policy, theta, meta)


def chain_mdp(rewards, seed=None):
    """Deterministic chain with one state per layer.

    Parameters
    ----------
    rewards : array_like
        Shape (H, A) reward means; a 1-d array means a single action.
    seed : int, optional
        Simulator seed.

    Returns
    -------
    EnvInstance
        The expert plays the highest-reward action (lowest index on ties).

    """
    R = np.asarray(rewards, dtype=float)
    if R.ndim == 1:
        R = R[:, np.newaxis]
    H, A = R.shape
    states = [[f"c{h}"] for h in range(1, H + 1)]
    transitions = [np.ones((1, A, 1)) for _ in range(H)]
    mdp = TabularMdp(states, transitions, [row[np.newaxis] for row in R],
                     [1.0], seed=seed)
    policy = {s: int(np.argmax(R[s.h - 1]))
              for h in range(1, H + 1) for s in mdp.states(h)}
    return _instance(mdp, policy, kind="chain")


def bandit_mdp(means, bernoulli=True, seed=None):
    """One-state, one-step MDP whose actions are arms with ``means``."""
    means = np.asarray(means, dtype=float)
    A = len(means)
    mdp = TabularMdp([["arm"]], [np.ones((1, A, 1))], [means[np.newaxis]],
                     [1.0], bernoulli=[np.full((1, A), bool(bernoulli))],
                     seed=seed)
    s0 = mdp.states(1)[0]
    return _instance(mdp, {s0: int(np.argmax(means))}, kind="bandit")


def random_tabular_mdp(width, H, A, seed=None, deterministic=False,
                       bernoulli=True, min_gap=0.2, max_tries=200):
    """Random layered MDP with a planted expert.

    Layer 1 holds a single start state, later layers hold ``width`` states.
    Rewards are planted backwards so the expert action beats every other
    action by at least ``min_gap`` in expert value, which makes the expert
    optimal.

    Parameters
    ----------
    width : int
        States per layer after the first.
    H, A : int
        Horizon and number of actions.
    seed : int, optional
        Seeds both the construction and the simulator.
    deterministic : bool, default False
        Single successor per state-action pair.
    bernoulli : bool, default True
        Emit Bernoulli rewards; otherwise rewards are deterministic.
    min_gap : float, default 0.2
        Required advantage of the expert action.
    max_tries : int, default 200
        Resampling attempts per state before giving up.

    Returns
    -------
    EnvInstance
        One-hot features, the planted expert, θ° = value table; ``meta``
        holds the value tables and ``q_theta`` for one-hot (s, a) features.

    """
    if width < 1 or H < 1 or A < 1:
        raise InvalidArgument("width, H and A must be positive")
    rng = np.random.default_rng(seed)
    sizes = [1] + [width] * (H - 1)
    states = [[f"s{h}_{i}" for i in range(n)] for h, n in enumerate(sizes, 1)]
    transitions = [None] * H
    rewards = [None] * H
    expert_idx = [None] * H
    v_next = np.zeros(1)
    for h in range(H, 0, -1):
        n_h = sizes[h - 1]
        n_next = sizes[h] if h < H else 1
        P = np.empty((n_h, A, n_next))
        R = np.empty((n_h, A))
        E = np.empty(n_h, dtype=int)
        v = np.empty(n_h)
        for i in range(n_h):
            for _ in range(max_tries):
                if deterministic:
                    P_i = np.zeros((A, n_next))
                    P_i[np.arange(A), rng.integers(n_next, size=A)] = 1.0
                else:
                    P_i = rng.dirichlet(np.ones(n_next), size=A)
                R_i = rng.uniform(0.0, 0.25, size=A)
                e = int(rng.integers(A))
                cont = P_i @ v_next
                if A > 1:
                    others = np.delete(R_i + cont, e)
                    R_i[e] = max(others.max() + min_gap - cont[e], 0.0)
                else:
                    R_i[e] = rng.uniform(0.25, 1.0)
                if R_i[e] <= 1.0:
                    break
            else:
                raise RuntimeError(
                    f"could not plant a gap of {min_gap} at layer {h}")
            P[i], R[i], E[i] = P_i, R_i, e
            v[i] = R_i[e] + cont[e]
        transitions[h - 1] = P
        rewards[h - 1] = R
        expert_idx[h - 1] = E
        v_next = v
    bern = [np.full(r.shape, bool(bernoulli)) for r in rewards]
    mdp = TabularMdp(states, transitions, rewards, [1.0], bernoulli=bern,
                     seed=seed)
    policy = {s: int(expert_idx[h - 1][i])
              for h in range(1, H + 1) for i, s in enumerate(mdp.states(h))}
    return _instance(mdp, policy, kind="random", min_gap=min_gap)
