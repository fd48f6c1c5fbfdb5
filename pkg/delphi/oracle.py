"""Interactive expert oracle with call accounting."""

__all__ = ["ExpertOracle", "hypercube_oracle", "make_tabular_expert"]

import threading
from collections.abc import Mapping

from delphi.errors import BudgetExceeded, InvalidArgument, NoAction, Unsupported
from delphi.logger import check_logger


class ExpertOracle:
    """Deterministic expert policy answering ``query(state)`` with an action.

    The oracle reveals actions only. Every call is counted, optionally
    capped by ``budget`` and recorded in ``call_log``.

    Parameters
    ----------
    policy : callable or mapping
        State to action index.
    action_count : int
        Number of actions A.
    horizon : int, optional
        Horizon H; states at ``h > H`` are terminal.
    budget : int, optional
        Maximum number of queries; None for unlimited.
    logger : logging.Logger, optional
        Logger to show messages.

    Attributes
    ----------
    call_count : int
        Number of answered queries.
    call_log : list of dict
        One entry per query: iteration, state, action, cumulative_count.

    """

    def __init__(self, policy, action_count, horizon=None, budget=None,
                 logger=None):
        check_logger(self, logger)
        if budget is not None and budget < 0:
            raise InvalidArgument(f"budget must be non-negative; found {budget}")
        self.policy = policy
        self.action_count = int(action_count)
        self.horizon = horizon
        self.budget = budget
        self.call_count = 0
        self.call_log = []
        self._lock = threading.Lock()

    def __repr__(self):
        budget = "unlimited" if self.budget is None else self.budget
        return (f"<{self.__class__.__name__}: A={self.action_count}, "
                f"calls={self.call_count}, budget={budget} />")

    def _lookup(self, state):
        if isinstance(self.policy, Mapping):
            try:
                return self.policy[state]
            except KeyError:
                raise NoAction(f"the expert has no action at {state!r}")
        return self.policy(state)

    def query(self, state, iteration=None):
        """Return the expert action at ``state``.

        Raises
        ------
        NoAction
            At terminal or game-over states.
        BudgetExceeded
            When ``budget`` queries were already answered.

        """
        if self.horizon is not None and state.h > self.horizon:
            raise NoAction(f"the expert has no action at terminal {state!r}")
        with self._lock:
            if self.budget is not None and self.call_count >= self.budget:
                raise BudgetExceeded(
                    f"oracle budget of {self.budget} queries is exhausted")
            action = int(self._lookup(state))
            if not 0 <= action < self.action_count:
                raise ValueError(
                    f"expert returned action {action} outside "
                    f"range({self.action_count})")
            self.call_count += 1
            self.call_log.append({
                "iteration": iteration,
                "state": repr(state),
                "action": action,
                "cumulative_count": self.call_count,
            })
        self.logger.debug("query %d at %r -> %d", self.call_count, state,
                          action)
        return action

    def reset_count(self):
        """Zero the counter and clear the call log."""
        with self._lock:
            self.call_count = 0
            self.call_log = []


def make_tabular_expert(mdp, mode="optimal", policy=None, budget=None,
                        logger=None):
    """Return an ExpertOracle for an enumerable MDP.

    Parameters
    ----------
    mdp : MdpSim
        Simulator exposing exact outcome tables.
    mode : {"optimal", "provided"}, default "optimal"
        "optimal" plays the backward-induction optimal policy (lowest
        index on ties); "provided" wraps ``policy``.
    policy : mapping or callable, optional
        Expert policy for "provided" mode.
    budget : int, optional
        Query budget.
    logger : logging.Logger, optional
        Logger passed to the oracle.

    """
    if not mdp.is_enumerable:
        raise Unsupported(
            f"{mdp.__class__.__name__} does not expose its tables")
    if mode == "optimal":
        from delphi.exact import exact_optimal
        table = exact_optimal(mdp)
        policy = table.policy
    elif mode == "provided":
        if policy is None:
            raise InvalidArgument("mode 'provided' requires a policy")
    else:
        raise InvalidArgument(
            f"mode must be 'optimal' or 'provided'; found {mode!r}")
    return ExpertOracle(policy, mdp.action_count, mdp.horizon, budget,
                        logger)


def hypercube_oracle(mdp, budget=None, logger=None):
    """Return the bit-fixing expert of a HypercubeMdp as an oracle."""
    return ExpertOracle(mdp.expert_action, mdp.action_count, mdp.horizon,
                        budget, logger)
