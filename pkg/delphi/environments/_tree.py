"""Binary tree where the expert's q-values are linear but not greedy."""

__all__ = ["build_tree_counterexample"]

import numpy as np

from delphi.core import ActionFeatureMap, TabularMdp
from delphi.environments._base import EnvInstance
from delphi.errors import InvalidArgument

LEFT, RIGHT = 0, 1


def build_tree_counterexample(H, seed=None):
    """Build the depth-``H`` binary tree with rewards −1 (left), +1 (right).

    The expert plays right at the root and then alternates. Its q-values
    lie in {−1, 0, 1}; the one-dimensional features ``φ(s, a) = q°(s, a)``
    with ``θ = 1`` realize them exactly, yet greedy play in these features
    always goes right.

    Returns
    -------
    EnvInstance
        ``meta`` holds the q table (keyed by (State, action)).

    """
    if H < 2:
        raise InvalidArgument(f"H must be at least 2; found {H}")
    states = [[_path(j, h) for j in range(2 ** h)] for h in range(H)]
    transitions = []
    for h in range(H):
        n = 2 ** h
        if h + 1 < H:
            P = np.zeros((n, 2, 2 * n))
            for j in range(n):
                P[j, LEFT, 2 * j] = 1.0
                P[j, RIGHT, 2 * j + 1] = 1.0
        else:
            P = np.ones((n, 2, 1))
        transitions.append(P)
    rewards = [np.tile([-1.0, 1.0], (2 ** h, 1)) for h in range(H)]
    mdp = TabularMdp(states, transitions, rewards, [1.0],
                     reward_range=(-1.0, 1.0), seed=seed)
    policy = {}
    for h in range(1, H + 1):
        for s in mdp.states(h):
            last = s.key[-1]
            policy[s] = RIGHT if last in "^l" else LEFT
    v = {mdp.states(H + 1)[0]: 0.0}
    q = {}
    for h in range(H, 0, -1):
        for s in mdp.states(h):
            for a in (LEFT, RIGHT):
                (nxt,), _ = mdp.transition_probs(s, a)
                q[s, a] = mdp.reward_mean(s, a) + v[nxt]
            v[s] = q[s, policy[s]]
    features = ActionFeatureMap(1, H, lambda s, a: [q[s, a]], "q-tree")
    return EnvInstance(mdp, features, policy, np.array([1.0]),
                       {"kind": "tree", "q": q, "v": v})


def _path(j, length):
    """Key of the node reached by the bits of ``j`` (``length`` moves)."""
    bits = format(j, f"0{length}b") if length else ""
    return "^" + bits.replace("0", "l").replace("1", "r")
