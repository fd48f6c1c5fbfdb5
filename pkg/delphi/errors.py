"""Exceptions raised by delphi.

Each error derives from the closest builtin exception, so callers may catch
either the specific class or, for example, ``ValueError``.
"""

__all__ = [
    "BudgetExceeded",
    "DeterminismViolation",
    "DimensionError",
    "EmptyVersionSpace",
    "IllegalSequence",
    "InvalidAction",
    "InvalidArgument",
    "InvalidConfig",
    "IterationOverflow",
    "LengthExceeded",
    "NoAction",
    "NoCheckpoint",
    "SolverStall",
    "TerminalStep",
    "UnknownState",
    "Unsupported",
]


class TerminalStep(RuntimeError):
    """Step or measurement requested from a terminal-layer state."""


class NoCheckpoint(RuntimeError):
    """Reset requested before any step since the last restart."""


class InvalidAction(ValueError):
    """Action index outside ``range(A)``."""


class UnknownState(KeyError):
    """State is not part of the feature map or simulator."""


class DimensionError(ValueError):
    """Vector lengths do not agree."""


class InvalidConfig(ValueError):
    """Environment or experiment configuration is not valid."""


class InvalidArgument(ValueError):
    """Argument outside its documented domain."""


class NoAction(LookupError):
    """The expert has no action at this state (terminal or game over)."""


class BudgetExceeded(RuntimeError):
    """Oracle query budget is exhausted."""


class Unsupported(NotImplementedError):
    """Operation needs exact tables that this simulator does not expose."""


class IterationOverflow(RuntimeError):
    """More version-space constraints than the iteration bound allows."""


class EmptyVersionSpace(ValueError):
    """The version space admits no parameter.

    Attributes
    ----------
    violations : numpy.ndarray
        Constraint violations at the nearest point of the slabs, or at the
        origin when the slabs share no point; first entry is the ball.

    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = violations


class SolverStall(RuntimeError):
    """Optimistic program did not converge within the iteration caps.

    Attributes
    ----------
    best : delphi.version_space.OptimisticSolution
        Best iterate found before giving up.

    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DeterminismViolation(RuntimeError):
    """Two distinct successors were observed for one state-action pair."""


class IllegalSequence(ValueError):
    """CubeGame input with a step shorter than p/4.

    Attributes
    ----------
    index : int
        Position (1-based, as w_0 is the fixed start) of the first bad step.

    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class LengthExceeded(ValueError):
    """CubeGame input longer than the allowed number of phases."""
