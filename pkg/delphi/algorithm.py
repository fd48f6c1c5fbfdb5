"""Expert-assisted guess-and-check learner.

The learner keeps a version space of linear value parameters. Each
iteration picks the most optimistic parameter, rolls out the policy it
induces and measures TD vectors along the way. A state where no action is
consistent with the parameter costs one expert query, and the refined TD
vector of the expert action cuts the version space.
"""

__all__ = [
    "Delphi",
    "DelphiResult",
    "HyperParams",
    "InducedPolicy",
    "QInducedPolicy",
    "RolloutEstimate",
    "RunStats",
    "compute_hyperparameters",
    "consistency_test",
    "estimate_start_features",
    "evaluate_policy_rollouts",
    "induced_policy_action",
    "run_delphi",
    "run_delphi_q",
    "td_residuals",
]

import math
import pickle
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
import pandas as pd

from delphi.core import ActionFeatureMap
from delphi.errors import (
    DeterminismViolation,
    InvalidArgument,
    InvalidConfig,
    NoAction,
)
from delphi.logger import check_logger
from delphi.measure import measure_q_td, measure_td, true_q_td, true_td
from delphi.version_space import VersionSpace, optimistic_argmax

THRESHOLD_RULES = ("proof", "pseudocode")
TIE_TOL = 1e-12


@dataclass(frozen=True)
class HyperParams:
    """Sample sizes, tolerances and thresholds of a run.

    Integer fields are rounded up. ``overridden`` names the fields that were
    set by hand; everything else follows from the inputs.
    """

    d: int
    H: int
    A: int
    B: float
    eps_target: float
    delta: float
    E_d: int
    n_rollout: int
    N: int
    n_eval: int
    eps_eval: float
    eps_bar_eval: float
    eps_tol: float
    eps_roll: float
    tau: float
    threshold_rule: str = "proof"
    misspecified: bool = False
    overridden: frozenset = field(default_factory=frozenset)

    @property
    def n_refined(self):
        """Samples of the refined measurement, ``4·E_d·n_eval``."""
        return 4 * self.E_d * self.n_eval

    @property
    def iterations(self):
        """Iteration bound ``E_d + 1``."""
        return self.E_d + 1

    @property
    def misspecification_tolerance(self):
        """Tolerated feature misspecification ``ε̄_eval/(8√E_d)``."""
        return self.eps_bar_eval / (8 * math.sqrt(self.E_d))

    @property
    def inaccuracy_tolerance(self):
        """Tolerated reward inaccuracy ``ε̄_eval/(4√E_d)``."""
        return self.eps_bar_eval / (4 * math.sqrt(self.E_d))

    @property
    def sample_bound(self):
        """Exploratory-sample bound of a run, rollout steps included."""
        T = self.iterations
        return (T * self.H * self.n_rollout * self.A * self.n_eval
                + T * self.n_refined + T * self.n_rollout * self.H)

    def to_dict(self):
        doc = asdict(self)
        doc["overridden"] = sorted(self.overridden)
        return doc

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        doc["overridden"] = frozenset(doc.get("overridden", ()))
        return cls(**doc)


OVERRIDABLE = ("E_d", "n_rollout", "N", "n_eval", "eps_eval", "eps_bar_eval",
               "eps_tol", "eps_roll", "tau")


def compute_hyperparameters(d, H, A, B, eps_target, delta, overrides=None,
                            misspecified=False, threshold_rule="proof"):
    """Derive all hyperparameters from the problem constants.

    Every field in ``OVERRIDABLE`` may be overridden; fields computed later
    use the overridden values.

    Parameters
    ----------
    d, H, A : int
        Feature dimension, horizon and number of actions.
    B : float
        Bound on the parameter norm.
    eps_target : float
        Target suboptimality ε, at most H.
    delta : float
        Failure probability.
    overrides : mapping, optional
        Field name to value.
    misspecified : bool, default False
        Quadruple ``n_eval`` for misspecified or inaccurate simulators.
    threshold_rule : {"proof", "pseudocode"}, default "proof"
        Slab threshold ``ε̄_eval/(2√E_d)`` or ``ε_tol``.

    Returns
    -------
    HyperParams

    Examples
    --------
    >>> hp = compute_hyperparameters(1, 2, 2, 1.0, 2.0, 0.1)
    >>> hp.E_d
    10
    """
    for name, value in (("d", d), ("H", H), ("A", A), ("B", B),
                        ("eps_target", eps_target), ("delta", delta)):
        if not value > 0:
            raise InvalidArgument(f"{name} must be positive; found {value!r}")
    if eps_target > H:
        raise InvalidArgument(f"eps_target must be at most H={H}")
    if threshold_rule not in THRESHOLD_RULES:
        raise InvalidConfig(
            f"threshold_rule must be one of {THRESHOLD_RULES}; "
            f"found {threshold_rule!r}")
    ov = dict(overrides or {})
    unknown = set(ov) - set(OVERRIDABLE)
    if unknown:
        raise InvalidConfig(f"unknown hyperparameter overrides: {sorted(unknown)}")
    eps = eps_target

    def pick(name, compute, kind=float):
        if name in ov:
            value = kind(ov[name])
            if not value > 0:
                raise InvalidConfig(f"override {name} must be positive")
            return value
        return compute()

    E_d = pick("E_d", lambda: math.ceil(
        3 * d * math.e / (math.e - 1) * math.log(3 + 3 * (2 * B / eps) ** 2)
        + 1), int)
    log_roll = math.log(2 * (E_d + 1) / delta)
    n_rollout = pick("n_rollout", lambda: math.ceil(
        2 * H ** 2 * (1 + 2 * B) ** 2 * log_roll / eps ** 2), int)
    N = pick("N", lambda: (E_d + 1) * n_rollout * H * A, int)
    log_eval = math.log(2 * (d + 1) * N / delta)

    def n_eval_formula():
        n = math.ceil(50 * H ** 2 * (1 + B ** 2) * (d + 1) * log_eval
                      / eps ** 2)
        return 4 * n if misspecified else n

    n_eval = pick("n_eval", n_eval_formula, int)
    eps_eval = pick("eps_eval",
                    lambda: math.sqrt(log_eval / (2 * n_eval)))
    eps_bar_eval = pick("eps_bar_eval", lambda: (
        math.sqrt(1 + B ** 2) * math.sqrt(d + 1) * eps_eval))
    eps_tol = pick("eps_tol", lambda: 4 * eps_bar_eval)
    eps_roll = pick("eps_roll", lambda: (
        H * (1 + 2 * B) * math.sqrt(log_roll / (2 * n_rollout))))

    def tau_rule():
        if threshold_rule == "proof":
            return eps_bar_eval / (2 * math.sqrt(E_d))
        return eps_tol

    tau = pick("tau", tau_rule)
    return HyperParams(
        d=int(d), H=int(H), A=int(A), B=float(B),
        eps_target=float(eps_target), delta=float(delta), E_d=E_d,
        n_rollout=n_rollout, N=N, n_eval=n_eval, eps_eval=eps_eval,
        eps_bar_eval=eps_bar_eval, eps_tol=eps_tol, eps_roll=eps_roll,
        tau=tau, threshold_rule=threshold_rule,
        misspecified=bool(misspecified), overridden=frozenset(ov))


def td_residuals(tds, theta):
    """Return ``|⟨Δ, 1 ⊕ θ⟩|`` for each TD vector."""
    return np.array([abs(td.residual(theta)) for td in tds])


def consistency_test(tds, theta, eps_tol):
    """Test whether some action is consistent with ``theta``.

    Returns
    -------
    consistent : bool
        The smallest absolute residual is at most ``eps_tol``.
    best : int
        Index of the smallest residual, lowest index on ties.

    Examples
    --------
    >>> from delphi.measure import TDVector
    >>> tds = [TDVector([r], 1) for r in (0.3, 0.1, 0.1)]
    >>> consistency_test(tds, [], 0.2)
    (True, 1)
    """
    if len(tds) == 0:
        raise InvalidArgument("consistency test needs at least one action")
    res = td_residuals(tds, theta)
    best = int(np.argmin(res))
    return bool(res[best] <= eps_tol), best


class InducedPolicy:
    """Policy playing the action with the smallest measured TD residual.

    Parameters
    ----------
    theta : array_like
        Value parameter.
    fm : FeatureMap
        State features.
    n_eval : int
        Samples per action measurement.

    """

    def __init__(self, theta, fm, n_eval):
        self.theta = np.asarray(theta, dtype=float)
        self.fm = fm
        self.n_eval = int(n_eval)

    def __repr__(self):
        return (f"<{self.__class__.__name__}: d={len(self.theta)}, "
                f"n_eval={self.n_eval} />")

    def act(self, sim):
        """Measure every action at the simulator's state; return the argmin.

        The simulator stays at its state.
        """
        state = sim.current_state
        if sim.is_terminal(state):
            raise NoAction(f"no action at terminal {state!r}")
        tds = [measure_td(sim, self.fm, a, self.n_eval)
               for a in range(sim.action_count)]
        return int(np.argmin(td_residuals(tds, self.theta)))

    def exact_action(self, sim, state):
        """Argmin of exact residuals, lowest index within 1e-12."""
        res = td_residuals([true_td(sim, self.fm, state, a)
                            for a in range(sim.action_count)], self.theta)
        return int(np.flatnonzero(res <= res.min() + TIE_TOL)[0])

    def exact_actions(self, sim):
        """Return dict of every reachable non-terminal state to its action."""
        layers = sim.enumerate_states()
        return {s: self.exact_action(sim, s)
                for h in range(1, sim.horizon + 1) for s in layers[h]}


def induced_policy_action(policy, sim):
    """Return the action ``policy`` plays at the simulator's current state."""
    return policy.act(sim)


class QInducedPolicy:
    """q-form policy: start with ``first_action``, then at each successor
    play the action with the smallest TD residual against the previous pair.
    """

    def __init__(self, theta, fm, n_eval, first_action):
        self.theta = np.asarray(theta, dtype=float)
        self.fm = fm
        self.n_eval = int(n_eval)
        self.first_action = int(first_action)

    def __repr__(self):
        return (f"<{self.__class__.__name__}: d={len(self.theta)}, "
                f"first action {self.first_action} />")

    def trajectory(self, sim):
        """Return the noiseless (state, action) trajectory from the start."""
        ((_, state),) = sim.start_outcomes()
        a = self.first_action
        path = []
        for _ in range(sim.horizon):
            path.append((state, a))
            outcomes = sim.outcomes(state, a)
            if len({o[2] for o in outcomes}) > 1:
                raise DeterminismViolation(
                    f"stochastic transition at {state!r}, action {a}")
            nxt = outcomes[0][2]
            if sim.is_terminal(nxt):
                break
            res = td_residuals([true_q_td(sim, self.fm, state, a, a2)
                                for a2 in range(sim.action_count)],
                               self.theta)
            a = int(np.flatnonzero(res <= res.min() + TIE_TOL)[0])
            state = nxt
        return path

    def rollout(self, sim):
        """Play one episode with measured residuals; return its total reward.

        Each successor action is the argmin of ``n_eval``-sample q-form TD
        residuals measured at the previous pair, as during learning.
        """
        sim.restart()
        a = self.first_action
        total = 0.0
        while True:
            _, tds = measure_q_td(sim, self.fm, a, self.n_eval)
            reward, state = sim.step(a)
            total += reward
            if sim.is_terminal(state):
                return total
            a = int(np.argmin(td_residuals(tds, self.theta)))

    def exact_return(self, sim):
        """Expected return of the noiseless trajectory."""
        total = 0.0
        for state, a in self.trajectory(sim):
            total += sum(p * r for p, r, _ in sim.outcomes(state, a))
        return total


@dataclass
class RunStats:
    """Accounting of one run."""

    mode: str = "v"
    oracle_calls: int = 0
    free_constraints: int = 0
    exploratory_samples: int = 0
    restarts: int = 0
    iterations: int = 0
    optimistic_values: list = field(default_factory=list)
    termination: str = None
    theta: np.ndarray = None
    constraints: VersionSpace = None
    records: list = field(default_factory=list)
    params: HyperParams = None

    @property
    def breaks(self):
        """Iterations that ended in a consistency break."""
        return self.oracle_calls + self.free_constraints

    def to_frame(self):
        """Return per-iteration records as a DataFrame."""
        columns = ["t", "optimistic_value", "first_action", "rollouts",
                   "break_h", "break_state", "residual", "oracle_action",
                   "samples"]
        rows = [{k: rec.get(k) for k in columns} for rec in self.records]
        return pd.DataFrame(rows, columns=columns)

    def summary(self):
        """Return a flat dict of the scalar statistics."""
        return {
            "mode": self.mode,
            "termination": self.termination,
            "iterations": self.iterations,
            "oracle_calls": self.oracle_calls,
            "free_constraints": self.free_constraints,
            "exploratory_samples": self.exploratory_samples,
            "restarts": self.restarts,
            "final_optimistic_value": (self.optimistic_values[-1]
                                       if self.optimistic_values else None),
        }

    def __getstate__(self):
        state = dict(self.__dict__)
        state["class"] = self.__class__.__name__
        return state

    def __setstate__(self, state):
        if state.get("class") != self.__class__.__name__:
            raise ValueError("expected state class {!r}; found {!r}"
                             .format(self.__class__.__name__,
                                     state.get("class")))
        state = dict(state)
        del state["class"]
        self.__dict__.update(state)

    def to_pickle(self, path, protocol=pickle.HIGHEST_PROTOCOL):
        """Pickle (serialize) object to file."""
        with open(path, "wb") as f:
            pickle.dump(self, f, protocol=protocol)

    @classmethod
    def from_pickle(cls, path):
        """Read a pickled format from a file."""
        with open(path, "rb") as f:
            return pickle.load(f)


class DelphiResult(NamedTuple):
    theta: np.ndarray
    policy: object
    stats: RunStats


class Delphi:
    """Guess-and-check learner driving a simulator and an expert oracle.

    Parameters
    ----------
    sim : MdpSim
        Simulator with checkpoint resets.
    oracle : ExpertOracle
        Expert to query at consistency breaks.
    fm : FeatureMap or ActionFeatureMap
        State features (``mode="v"``) or state-action features
        (``mode="q"``).
    params : HyperParams
        Hyperparameters.
    mode : {"v", "q"}, default "v"
        Value or q-function form.
    exact : bool, default False
        Treat a single sample as exact; only valid on deterministic
        simulators.
    start_features : array_like, optional
        Known ``E[φ(s₀)]``; per start action (shape (A, d)) in q-mode.
    start_samples : int, default 1000
        Restarts used to estimate start features of a stochastic start.
    logger : logging.Logger, optional
        Logger to show messages.

    """

    def __init__(self, sim, oracle, fm, params, mode="v", exact=False,
                 start_features=None, start_samples=1000, logger=None):
        check_logger(self, logger)
        if mode not in ("v", "q"):
            raise InvalidConfig(f"mode must be 'v' or 'q'; found {mode!r}")
        if (mode == "q") != isinstance(fm, ActionFeatureMap):
            raise InvalidConfig(
                f"mode {mode!r} needs "
                f"{'state-action' if mode == 'q' else 'state'} features")
        if fm.d != params.d:
            raise InvalidConfig(
                f"features have d={fm.d} but params have d={params.d}")
        if exact and getattr(sim, "deterministic", True) is False:
            raise InvalidConfig("exact measurement needs a deterministic MDP")
        self.sim = sim
        self.oracle = oracle
        self.fm = fm
        self.params = params
        self.mode = mode
        self.exact = bool(exact)
        self.start_features = start_features
        self.start_samples = int(start_samples)

    def __repr__(self):
        return (f"<{self.__class__.__name__}: mode={self.mode}, "
                f"d={self.params.d}, H={self.params.H}, "
                f"E_d={self.params.E_d} />")

    @property
    def n_eval(self):
        return 1 if self.exact else self.params.n_eval

    @property
    def n_refined(self):
        return 1 if self.exact else self.params.n_refined

    def _objectives(self):
        """Return one objective vector per start choice."""
        sim, fm = self.sim, self.fm
        if self.start_features is not None:
            c = np.asarray(self.start_features, dtype=float)
            return c.reshape(-1, fm.d)
        if self.mode == "v":
            if sim.has_deterministic_start:
                return np.array([fm(sim.restart())])
            return np.array([estimate_start_features(
                sim, fm, self.start_samples)])
        if not sim.has_deterministic_start:
            return np.array([
                estimate_start_features(sim, fm, self.start_samples, a)
                for a in range(sim.action_count)])
        s0 = sim.restart()
        return np.array([fm(s0, a) for a in range(sim.action_count)])

    def run(self):
        """Run until a clean batch of rollouts or the iteration bound.

        Returns
        -------
        DelphiResult
            ``(theta, policy, stats)``.

        """
        sim, params = self.sim, self.params
        stats = RunStats(mode=self.mode, params=params)
        samples0 = sim.sample_count
        restarts0 = sim.restart_count
        calls0 = self.oracle.call_count
        objectives = self._objectives()
        space = VersionSpace(params.B, params.d,
                             max_constraints=params.iterations)
        self.logger.info(
            "starting %s-mode run: d=%d, H=%d, A=%d, E_d=%d, n_eval=%d, "
            "n_rollout=%d", self.mode, params.d, params.H, params.A,
            params.E_d, self.n_eval, params.n_rollout)
        theta = np.zeros(params.d)
        first_action = 0
        for t in range(1, params.iterations + 1):
            sols = [optimistic_argmax(space, c) for c in objectives]
            values = np.array([sol.value for sol in sols])
            first_action = int(np.argmax(values))
            sol = sols[first_action]
            theta = sol.theta
            stats.optimistic_values.append(sol.value)
            stats.iterations = t
            rec = {"t": t, "optimistic_value": sol.value,
                   "theta": theta.tolist(), "rollouts": 0,
                   "first_action": first_action if self.mode == "q" else None,
                   "break_h": None, "break_state": None, "residual": None,
                   "oracle_action": None}
            if self.mode == "v":
                space, broke = self._rollouts_v(t, theta, space, rec, stats)
            else:
                space, broke = self._rollouts_q(t, theta, first_action,
                                                space, rec, stats)
            rec["samples"] = sim.sample_count - samples0
            stats.records.append(rec)
            self.logger.debug(
                "iteration %d: optimistic value %.6g, %s", t, sol.value,
                f"break at h={rec['break_h']}" if broke else "consistent")
            if not broke:
                stats.termination = "consistent"
                break
        else:
            stats.termination = "exhausted"
            self.logger.warning(
                "no consistent parameter after %d iterations",
                params.iterations)
        stats.theta = theta
        stats.constraints = space
        stats.oracle_calls = self.oracle.call_count - calls0
        stats.exploratory_samples = sim.sample_count - samples0
        stats.restarts = sim.restart_count - restarts0
        if self.mode == "v":
            policy = InducedPolicy(theta, self.fm, params.n_eval)
        else:
            policy = QInducedPolicy(theta, self.fm, params.n_eval,
                                    first_action)
        self.logger.info(
            "finished after %d iterations (%s): %d oracle calls, "
            "%d samples", stats.iterations, stats.termination,
            stats.oracle_calls, stats.exploratory_samples)
        return DelphiResult(theta, policy, stats)

    def _rollouts_v(self, t, theta, space, rec, stats):
        sim, fm, params = self.sim, self.fm, self.params
        A = sim.action_count
        for m in range(1, params.n_rollout + 1):
            rec["rollouts"] = m
            sim.restart()
            for h in range(1, params.H + 1):
                state = sim.current_state
                if sim.is_terminal(state):
                    break
                tds = []
                for a in range(A):
                    sim.reseed(t, m, h, a)
                    tds.append(measure_td(sim, fm, a, self.n_eval))
                ok, best = consistency_test(tds, theta, params.eps_tol)
                if not ok:
                    action = self.oracle.query(state, iteration=t)
                    sim.reseed(t, m, h, A)
                    refined = measure_td(sim, fm, action, self.n_refined,
                                         tag="refined")
                    space = space.add_constraint(
                        refined, params.tau, origin=state, iteration=t)
                    rec.update(break_h=h, break_state=repr(state),
                               residual=float(td_residuals(tds, theta)[best]),
                               oracle_action=action)
                    return space, True
                sim.reseed(t, m, h)
                sim.step(best)
        return space, False

    def _rollouts_q(self, t, theta, first_action, space, rec, stats):
        sim, fm, params = self.sim, self.fm, self.params
        A = sim.action_count
        for m in range(1, params.n_rollout + 1):
            rec["rollouts"] = m
            sim.restart()
            a = first_action
            for h in range(1, params.H + 1):
                state = sim.current_state
                sim.reseed(t, m, h, 0)
                nxt, tds = measure_q_td(sim, fm, a, self.n_eval)
                if sim.is_terminal(nxt):
                    ok = abs(tds[0].residual(theta)) <= params.eps_tol
                    best, action = 0, None
                else:
                    ok, best = consistency_test(tds, theta, params.eps_tol)
                if not ok:
                    if not sim.is_terminal(nxt):
                        action = self.oracle.query(nxt, iteration=t)
                    else:
                        stats.free_constraints += 1
                    sim.reseed(t, m, h, A)
                    nxt2, refined = measure_q_td(sim, fm, a, self.n_refined,
                                                 tag="refined")
                    if nxt2 != nxt:
                        raise DeterminismViolation(
                            f"successors {nxt!r} and {nxt2!r} observed for "
                            f"{state!r}, action {a}")
                    space = space.add_constraint(
                        refined[0 if action is None else action], params.tau,
                        origin=state, iteration=t)
                    rec.update(break_h=h, break_state=repr(state),
                               residual=float(abs(tds[best].residual(theta))),
                               oracle_action=action)
                    return space, True
                sim.reseed(t, m, h)
                _, landed = sim.step(a)
                if landed != nxt:
                    raise DeterminismViolation(
                        f"successors {nxt!r} and {landed!r} observed for "
                        f"{state!r}, action {a}")
                a = best
        return space, False


def run_delphi(sim, oracle, fm, params, exact=False, start_features=None,
               start_samples=1000, logger=None):
    """Run the value-form learner; return ``(theta, policy, stats)``."""
    return Delphi(sim, oracle, fm, params, "v", exact, start_features,
                  start_samples, logger).run()


def run_delphi_q(sim, oracle, fm, params, exact=False, start_features=None,
                 start_samples=1000, logger=None):
    """Run the q-form learner on a simulator with deterministic transitions."""
    return Delphi(sim, oracle, fm, params, "q", exact, start_features,
                  start_samples, logger).run()


def estimate_start_features(sim, fm, n, action=None):
    """Average φ over ``n`` restarts; no exploratory samples are used.

    With state-action features pass the start ``action``.
    """
    if int(n) != n or n < 1:
        raise InvalidArgument(f"n must be a positive integer; found {n!r}")
    total = np.zeros(fm.d)
    for _ in range(int(n)):
        state = sim.restart()
        total += fm(state) if action is None else fm(state, action)
    return total / n


class RolloutEstimate(NamedTuple):
    """Monte Carlo return estimate with a Hoeffding half-width."""

    mean: float
    half_width: float
    returns: np.ndarray


def _act(policy, sim, state):
    if hasattr(policy, "act"):
        return policy.act(sim)
    if isinstance(policy, Mapping):
        return policy[state]
    return policy(state)


def evaluate_policy_rollouts(sim, policy, m, delta=0.01):
    """Estimate the start value of ``policy`` from ``m`` episodes.

    Parameters
    ----------
    sim : MdpSim
        Simulator.
    policy : InducedPolicy, QInducedPolicy, mapping or callable
        Policy to roll out; a policy with a ``rollout`` method plays its
        own episodes.
    m : int
        Number of episodes.
    delta : float, default 0.01
        Confidence level of the half-width ``H·√(ln(2/δ)/(2m))``.

    Returns
    -------
    RolloutEstimate

    """
    if int(m) != m or m < 1:
        raise InvalidArgument(f"m must be a positive integer; found {m!r}")
    returns = np.zeros(int(m))
    for i in range(int(m)):
        if hasattr(policy, "rollout"):
            returns[i] = policy.rollout(sim)
            continue
        state = sim.restart()
        while not sim.is_terminal(state):
            reward, state = sim.step(_act(policy, sim, state))
            returns[i] += reward
    half_width = sim.horizon * math.sqrt(math.log(2 / delta) / (2 * m))
    return RolloutEstimate(float(returns.mean()), half_width, returns)

