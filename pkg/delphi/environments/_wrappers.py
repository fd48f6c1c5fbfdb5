"""Inaccurate-simulator and misspecified-feature wrappers."""

__all__ = ["InaccurateSim", "MisspecifiedFeatureMap", "wrap_inaccurate"]

import numpy as np

from delphi.core import FeatureMap, MdpSim
from delphi.errors import InvalidArgument
from delphi.util import stable_hash

OFFSET_RULES = ("constant", "random")


class InaccurateSim(MdpSim):
    """Simulator emitting ``clip(r + λ_{s,a}, 0, 1)`` instead of ``r``.

    Transitions are those of the inner simulator. Each state-action pair
    has a fixed offset with ``|λ_{s,a}| ≤ lam``.

    Parameters
    ----------
    inner : MdpSim
        Wrapped simulator.
    lam : float
        Offset bound λ ≥ 0.
    offset_rule : {"constant", "random"} or callable, default "random"
        "constant" uses ``+lam`` everywhere, "random" draws a uniform offset
        per pair from ``offset_seed``; a callable ``rule(state, a)`` returns
        the offset.
    offset_seed : int, default 0
        Seed of the per-pair random offsets.
    seed : int, optional
        Simulator seed; defaults to the inner simulator's seed.
    logger : logging.Logger, optional
        Logger to show messages.

    """

    reward_range = (0.0, 1.0)

    def __init__(self, inner, lam, offset_rule="random", offset_seed=0,
                 seed=None, logger=None):
        if lam < 0:
            raise InvalidArgument(f"lam must be non-negative; found {lam}")
        if not callable(offset_rule) and offset_rule not in OFFSET_RULES:
            raise InvalidArgument(
                f"offset_rule must be one of {OFFSET_RULES} or callable; "
                f"found {offset_rule!r}")
        super().__init__(inner.horizon, inner.action_count,
                         seed=inner.seed if seed is None else seed,
                         logger=logger)
        self.inner = inner
        self.lam = float(lam)
        self.offset_rule = offset_rule
        self.offset_seed = int(offset_seed)
        self._offsets = {}

    def __repr__(self):
        rule = getattr(self.offset_rule, "__name__", self.offset_rule)
        return (f"<{self.__class__.__name__}: λ={self.lam}, rule={rule}, "
                f"inner={self.inner.__class__.__name__} />")

    @property
    def deterministic(self):
        """Whether the inner simulator is deterministic; offsets are fixed."""
        return getattr(self.inner, "deterministic", True)

    def offset(self, state, a):
        """Return the fixed offset λ_{s,a}."""
        key = (state, int(a))
        try:
            return self._offsets[key]
        except KeyError:
            pass
        if self.offset_rule == "constant":
            value = self.lam
        elif self.offset_rule == "random":
            seq = np.random.SeedSequence(
                [self.offset_seed, stable_hash(state.key), state.h, int(a)])
            value = float(np.random.default_rng(seq).uniform(
                -self.lam, self.lam))
        else:
            value = float(self.offset_rule(state, a))
            if abs(value) > self.lam + 1e-12:
                raise InvalidArgument(
                    f"offset {value} at {state!r} exceeds λ={self.lam}")
        self._offsets[key] = value
        return value

    def _draw_start(self, rng):
        return self.inner._draw_start(rng)

    def _draw(self, state, a, n, rng):
        rewards, successors, counts = self.inner._draw(state, a, n, rng)
        rewards = np.clip(rewards + self.offset(state, a), 0.0, 1.0)
        return rewards, successors, counts

    def _start_outcomes(self):
        return self.inner._start_outcomes()

    def _outcomes(self, state, a):
        lam = self.offset(state, a)
        return [(p, float(np.clip(r + lam, 0.0, 1.0)), nxt)
                for p, r, nxt in self.inner._outcomes(state, a)]

    def enumerate_states(self):
        return self.inner.enumerate_states()


def wrap_inaccurate(sim, lam, offset_rule="random", offset_seed=0):
    """Return ``sim`` observed through per-pair reward offsets of size λ."""
    return InaccurateSim(sim, lam, offset_rule, offset_seed)


class MisspecifiedFeatureMap(FeatureMap):
    """Feature map with a fixed per-state perturbation of norm ``eta / B``.

    Perturbed vectors are projected back onto the unit ball, so for any
    ``‖θ‖ ≤ B`` the value changes by at most ``eta``.
    """

    def __init__(self, inner, eta, B, seed=0):
        if eta < 0 or B <= 0:
            raise InvalidArgument("need eta ≥ 0 and B > 0")
        self.inner = inner
        self.eta = float(eta)
        self.B = float(B)
        self.seed = int(seed)
        super().__init__(inner.d, inner.horizon, self._perturbed,
                         f"{inner.name}+misspecified")

    def _perturbed(self, state):
        vec = np.array(self.inner(state), dtype=float)
        seq = np.random.SeedSequence(
            [self.seed, stable_hash(state.key), state.h])
        direction = np.random.default_rng(seq).standard_normal(self.d)
        direction /= np.linalg.norm(direction)
        vec += direction * self.eta / self.B
        norm = np.linalg.norm(vec)
        if norm > 1.0:
            vec /= norm
        return vec
