"""Environment instance bundle shared by the builders."""

__all__ = ["EnvInstance"]

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EnvInstance:
    """A simulator with its features, expert and realizing parameter.

    Attributes
    ----------
    sim : delphi.core.MdpSim
        The simulator.
    features : delphi.core.FeatureMap or delphi.core.ActionFeatureMap
        Features under which the expert's values are linear.
    expert : dict or callable
        Expert policy, State to action index.
    theta : numpy.ndarray
        Parameter with ``⟨φ, θ⟩`` equal to the expert's value.
    meta : dict
        Builder-specific extras, such as value tables or scales.

    """

    sim: object
    features: object
    expert: object
    theta: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def B(self):
        """Norm of the realizing parameter."""
        return float(np.linalg.norm(self.theta))

    def expert_action(self, state):
        """Return the expert's action at ``state``."""
        if callable(self.expert):
            return self.expert(state)
        return self.expert[state]
