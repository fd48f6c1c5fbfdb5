"""Temporal-difference vectors: measured from samples or computed exactly."""

__all__ = [
    "TDVector",
    "measure_q_td",
    "measure_td",
    "true_q_td",
    "true_td",
]

from dataclasses import dataclass

import numpy as np

from delphi.errors import DeterminismViolation, TerminalStep
from delphi.util import abbr_str, one_plus

TAGS = ("measured", "refined", "exact")


@dataclass(frozen=True)
class TDVector:
    """Reward part ⊕ feature difference, length ``d + 1``.

    Attributes
    ----------
    values : numpy.ndarray
        ``r ⊕ (E[φ(s′)] − φ(s))``.
    n : int
        Number of samples averaged; 0 for exact vectors.
    tag : str
        One of "measured", "refined" or "exact".

    """

    values: np.ndarray
    n: int
    tag: str = "measured"

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"tag must be one of {TAGS}; found {self.tag!r}")
        values = np.array(self.values, dtype=float)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __repr__(self):
        return (f"TDVector({abbr_str(self.values, 8)}, n={self.n}, "
                f"tag={self.tag!r})")

    @property
    def reward(self):
        return float(self.values[0])

    @property
    def feature_difference(self):
        return self.values[1:]

    def residual(self, theta):
        """Return ``⟨Δ, 1 ⊕ θ⟩``."""
        return float(np.dot(self.values, one_plus(theta)))

    def to_dict(self):
        return {"values": self.values.tolist(), "n": self.n, "tag": self.tag}

    @classmethod
    def from_dict(cls, doc):
        return cls(np.asarray(doc["values"], dtype=float), int(doc["n"]),
                   doc.get("tag", "measured"))


def measure_td(sim, fm, a, n, tag="measured"):
    """Estimate Δ_{s,a} at the simulator's current state from ``n`` samples.

    Each sample is a step followed by a reset to the checkpoint, so the
    simulator ends at the state it started from.

    Parameters
    ----------
    sim : MdpSim
        Simulator positioned at a non-terminal state.
    fm : FeatureMap
        State features.
    a : int
        Action.
    n : int
        Number of samples, at least 1.
    tag : str, default "measured"
        Tag stored on the result.

    Returns
    -------
    TDVector

    """
    state = sim.current_state
    rewards, successors, counts = sim.sample(a, n)
    phi_next = np.zeros(fm.d)
    for nxt, count in zip(successors, counts):
        phi_next += count * fm(nxt)
    values = np.concatenate(
        ([rewards.mean()], phi_next / n - fm(state)))
    return TDVector(values, int(n), tag)


def true_td(sim, fm, state, a):
    """Return the exact Δ_{s,a} from the simulator's outcome tables."""
    if sim.is_terminal(state):
        raise TerminalStep(f"no TD vector at terminal {state!r}")
    reward = 0.0
    phi_next = np.zeros(fm.d)
    for p, r, nxt in sim.outcomes(state, a):
        reward += p * r
        phi_next += p * fm(nxt)
    values = np.concatenate(([reward], phi_next - fm(state)))
    return TDVector(values, 0, "exact")


def measure_q_td(sim, fm, a, n, tag="measured"):
    """Measure the q-form TD vectors of ``a`` against every successor action.

    Returns the unique successor and a list of ``A`` TDVectors
    ``r ⊕ (φ(s′, a′) − φ(s, a))``. Two observed successors raise
    DeterminismViolation.
    """
    state = sim.current_state
    rewards, successors, counts = sim.sample(a, n)
    if len(successors) > 1:
        raise DeterminismViolation(
            f"{len(successors)} successors observed for {state!r}, "
            f"action {a}")
    nxt = successors[0]
    base = fm(state, a)
    reward = rewards.mean()
    tds = [TDVector(np.concatenate(([reward], fm(nxt, a2) - base)),
                    int(n), tag)
           for a2 in range(sim.action_count)]
    return nxt, tds


def true_q_td(sim, fm, state, a, a2):
    """Return the exact q-form TD vector of ``(s, a)`` followed by ``a2``."""
    outcomes = sim.outcomes(state, a)
    if len({nxt for _, _, nxt in outcomes}) > 1:
        raise DeterminismViolation(
            f"stochastic transition at {state!r}, action {a}")
    reward = sum(p * r for p, r, _ in outcomes)
    nxt = outcomes[0][2]
    values = np.concatenate(([reward], fm(nxt, a2) - fm(state, a)))
    return TDVector(values, 0, "exact")
