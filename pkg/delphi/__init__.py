"""Expert-assisted reinforcement learning with linear value features."""

__license__ = 'BSD'

__all__ = [
    "ActionFeatureMap",
    "CubeGame",
    "Delphi",
    "ExpertOracle",
    "FeatureMap",
    "HyperParams",
    "MdpSim",
    "State",
    "TabularMdp",
    "VersionSpace",
    "compute_hyperparameters",
    "exact_optimal",
    "exact_value",
    "run_delphi",
    "run_delphi_q",
]

from delphi._version import version as __version__
from delphi.algorithm import (
    Delphi,
    HyperParams,
    compute_hyperparameters,
    run_delphi,
    run_delphi_q,
)
from delphi.core import ActionFeatureMap, FeatureMap, MdpSim, State, TabularMdp
from delphi.cubegame import CubeGame
from delphi.exact import exact_optimal, exact_value
from delphi.oracle import ExpertOracle
from delphi.version_space import VersionSpace
