"""Seeded experiment sweeps with CSV and JSON reports."""

__all__ = [
    "ENVIRONMENT_KINDS",
    "ExperimentConfig",
    "build_environment",
    "build_game",
    "check_environment",
    "compare_oracle_budgets",
    "run_experiment",
    "run_seed",
    "verify_run",
]

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import pandas as pd

from delphi.algorithm import (
    RunStats,
    compute_hyperparameters,
    evaluate_policy_rollouts,
    run_delphi,
    run_delphi_q,
)
from delphi.cubegame import CubeGame, greedy_planner
from delphi.environments import (
    bandit_mdp,
    chain_mdp,
    hamming,
    hypercube_instance,
    one_hot_action_features,
    random_tabular_mdp,
    wrap_inaccurate,
)
from delphi.environments._tabular import _instance
from delphi.errors import InvalidConfig
from delphi.exact import check_delphi_eluder, exact_optimal, exact_value
from delphi.file import (
    read_constraints,
    read_json,
    read_tabular_json,
    write_constraints,
    write_json,
    write_jsonl,
    write_report,
)
from delphi.logger import get_logger
from delphi.oracle import ExpertOracle

ENVIRONMENT_KINDS = ("random", "chain", "bandit", "hypercube", "tabular",
                     "cubegame")
MODES = ("v", "q", "cubegame")

logger = get_logger("experiment")


@dataclass
class ExperimentConfig:
    """Everything needed to replay a sweep.

    Attributes
    ----------
    environment : dict
        ``kind`` plus builder arguments, e.g.
        ``{"kind": "random", "width": 3, "H": 3, "A": 2}``.
    mode : {"v", "q", "cubegame"}
        Learner form, or the greedy CubeGame planner.
    overrides : dict
        Hyperparameter overrides.
    seeds : list of int
        Seeds; each seeds the environment, simulator and oracle.
    out : str
        Output directory.
    repeat : int
        Runs per seed; repetition ``r`` of seed ``s`` uses seed key (s, r).
    eps_target, delta : float
        Target suboptimality and failure probability.
    B : float, optional
        Parameter bound; defaults to the norm of the realizing parameter.
    exact : bool
        Exact measurements on deterministic MDPs.
    threshold_rule : {"proof", "pseudocode"}
        Slab threshold rule.
    misspecified : bool
        Quadruple n_eval when not overridden.
    inaccuracy : float or "auto", optional
        Wrap the simulator with reward offsets of this size; "auto" uses
        the tolerated inaccuracy of the run's hyperparameters.
    oracle_budget : int, optional
        Expert query budget (CubeGame: planner budget, default p).
    budgets : list of int, optional
        Budget grid of :func:`compare_oracle_budgets`.
    sample_cap : int
        CubeGame play cap.
    tolerance : float
        A run succeeds if the rollout value of its returned policy, with
        measured residuals on the true simulator, is within this of the
        expert's value.
    eval_episodes : int
        Rollout episodes behind that value.
    workers : int
        Worker processes; 1 runs in-process.

    """

    environment: dict
    mode: str = "v"
    overrides: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0])
    out: str = "out"
    repeat: int = 1
    eps_target: float = 0.5
    delta: float = 0.1
    B: float = None
    exact: bool = False
    threshold_rule: str = "proof"
    misspecified: bool = False
    inaccuracy: object = None
    oracle_budget: int = None
    budgets: list = None
    sample_cap: int = 1000
    tolerance: float = 0.1
    eval_episodes: int = 100
    workers: int = 1

    def __post_init__(self):
        if not isinstance(self.environment, dict) or \
                self.environment.get("kind") not in ENVIRONMENT_KINDS:
            raise InvalidConfig(
                f"environment needs a kind from {ENVIRONMENT_KINDS}")
        if self.mode not in MODES:
            raise InvalidConfig(
                f"mode must be one of {MODES}; found {self.mode!r}")
        if (self.mode == "cubegame") != \
                (self.environment["kind"] == "cubegame"):
            raise InvalidConfig(
                "mode 'cubegame' goes with environment kind 'cubegame'")
        if self.mode == "q" and self.environment["kind"] == "hypercube":
            raise InvalidConfig("q-mode needs a tabular environment")
        if not isinstance(self.overrides, dict):
            raise InvalidConfig("overrides must be a mapping")
        if not self.seeds or \
                not all(isinstance(s, int) and s >= 0 for s in self.seeds):
            raise InvalidConfig("seeds must be a non-empty list of "
                                "non-negative integers")
        if len(set(self.seeds)) != len(self.seeds):
            raise InvalidConfig("seeds must be unique")
        for name in ("eps_target", "delta", "tolerance"):
            _as_number(name, getattr(self, name))
        if self.B is not None and not _as_number("B", self.B) > 0:
            raise InvalidConfig(f"B must be positive; found {self.B!r}")
        for name in ("repeat", "workers", "sample_cap", "eval_episodes"):
            value = getattr(self, name)
            if _as_number(name, value, int) < 1:
                raise InvalidConfig(f"{name} must be ≥ 1; found {value!r}")
        if self.oracle_budget is not None and \
                _as_number("oracle_budget", self.oracle_budget, int) < 0:
            raise InvalidConfig("oracle_budget must be non-negative")
        if self.budgets is not None and (
                not isinstance(self.budgets, list) or not self.budgets or
                min(_as_number("budgets", b, int) for b in self.budgets) < 0):
            raise InvalidConfig("budgets must be a non-empty list of "
                                "non-negative integers")
        if self.inaccuracy not in (None, "auto") and \
                not _as_number("inaccuracy", self.inaccuracy) >= 0:
            raise InvalidConfig("inaccuracy must be non-negative or 'auto'")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise InvalidConfig("configuration must be a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise InvalidConfig(f"unknown configuration keys: {sorted(unknown)}")
        if "environment" not in doc:
            raise InvalidConfig("configuration needs an environment")
        return cls(**doc)

    def to_json(self, path):
        write_json(self.to_dict(), path)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(read_json(path))


def _as_number(name, value, kind=float):
    """Return ``value`` as ``kind``; InvalidConfig unless it already is one."""
    try:
        number = kind(value)
    except (TypeError, ValueError, OverflowError):
        number = None
    if number is None or isinstance(value, (bool, str)) or number != value:
        what = "an integer" if kind is int else "a number"
        raise InvalidConfig(f"{name} must be {what}; found {value!r}")
    return number


def build_environment(env, seed):
    """Build an EnvInstance from an environment mapping and a seed."""
    env = dict(env)
    kind = env.pop("kind")
    try:
        if kind == "random":
            return random_tabular_mdp(seed=seed, **env)
        elif kind == "chain":
            return chain_mdp(env["rewards"], seed=seed)
        elif kind == "bandit":
            return bandit_mdp(env["means"], env.get("bernoulli", True),
                              seed=seed)
        elif kind == "hypercube":
            return hypercube_instance(
                env["p"], env["K"], env.get("s_star"), seed=seed,
                secret_seed=seed)
        elif kind == "tabular":
            return _tabular_from_file(env["path"], seed)
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidConfig(f"bad {kind!r} environment: {e}") from e
    raise InvalidConfig(f"cannot build environment of kind {kind!r}")


def build_game(env, seed):
    """Build a CubeGame from an environment mapping and a seed."""
    try:
        return CubeGame(env["p"], env["K"], env.get("w_star"), seed=seed,
                        mode=env.get("mode", "standard"))
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidConfig(f"bad 'cubegame' environment: {e}") from e


def check_environment(config):
    """Build the environment of the first seed; raise InvalidConfig if bad."""
    seed = min(config.seeds)
    if config.mode == "cubegame":
        build_game(config.environment, seed)
    else:
        build_environment(config.environment, seed)


def _tabular_from_file(path, seed):
    mdp = read_tabular_json(path, seed=seed)
    return _instance(mdp, exact_optimal(mdp).policy, kind="tabular")


def _start_value(sim, table):
    return float(sum(p * table.v[s] for p, s in sim.start_outcomes()))


def _seed_key(seed, rep):
    return seed if rep == 0 else int(np.random.SeedSequence(
        [seed, rep]).generate_state(1)[0])


def _run_delphi_seed(config, seed, rep):
    key = _seed_key(seed, rep)
    inst = build_environment(config.environment, key)
    true_sim = inst.sim
    if config.mode == "q":
        fm = one_hot_action_features(true_sim)
        theta_star = inst.meta["q_theta"]
    else:
        fm = inst.features
        theta_star = np.asarray(inst.theta, dtype=float)
    B = config.B or max(float(np.linalg.norm(theta_star)), 1e-3)
    params = compute_hyperparameters(
        fm.d, true_sim.horizon, true_sim.action_count, B, config.eps_target,
        config.delta, config.overrides, config.misspecified,
        config.threshold_rule)
    sim = true_sim
    if config.inaccuracy is not None:
        lam = params.inaccuracy_tolerance if config.inaccuracy == "auto" \
            else float(config.inaccuracy)
        sim = wrap_inaccurate(true_sim, lam, offset_seed=key)
    oracle = ExpertOracle(inst.expert, true_sim.action_count,
                          true_sim.horizon, config.oracle_budget)
    row = {"seed": seed, "repeat": rep, "d": params.d, "E_d": params.E_d,
           "n_eval": params.n_eval, "tau": params.tau}
    v_expert = _start_value(true_sim, exact_value(true_sim, inst.expert))
    row["v_expert"] = v_expert
    run = run_delphi_q if config.mode == "q" else run_delphi
    theta, policy, stats = run(sim, oracle, fm, params, exact=config.exact)
    row.update(stats.summary())
    row["oracle_counter"] = oracle.call_count
    est = evaluate_policy_rollouts(true_sim.clone(), policy,
                                   config.eval_episodes)
    row["v_policy"] = est.mean
    row["v_policy_half_width"] = est.half_width
    if config.mode == "q":
        row["v_policy_noiseless"] = float(sum(
            p * r for s, a in policy.trajectory(sim)
            for p, r, _ in true_sim.outcomes(s, a)))
    else:
        actions = policy.exact_actions(sim)
        row["v_policy_noiseless"] = _start_value(
            true_sim, exact_value(true_sim, actions))
    row["success"] = bool(est.mean >= v_expert - config.tolerance)
    dump = {"space": stats.constraints, "records": stats.records,
            "theta_star": theta_star.tolist(), "exact": config.exact,
            "eps_bar_eval": params.eps_bar_eval,
            "params": params.to_dict()}
    return row, dump, oracle.call_log


def _run_cubegame_seed(config, seed, rep):
    game = build_game(config.environment, _seed_key(seed, rep))
    res = greedy_planner(game, config.oracle_budget, config.sample_cap)
    row = {"seed": seed, "repeat": rep, "p": game.p, "K": game.K,
           "wrong_bits": hamming((1,) * game.p, game.w_star),
           "success": res.success, "oracle_calls": res.oracle_calls,
           "oracle_counter": game.oracle_calls,
           "exploratory_samples": res.samples, "reward": res.reward}
    return row, None, game.transcript


def run_seed(config, seed, rep=0):
    """Run one seed; failures are returned in the ``error`` column.

    Returns
    -------
    row : dict
        One report row.
    dump : dict or None
        Constraint dump of a learner run.
    log : list of dict
        Oracle call log, or the CubeGame transcript.

    """
    try:
        if config.mode == "cubegame":
            row, dump, log = _run_cubegame_seed(config, seed, rep)
        else:
            row, dump, log = _run_delphi_seed(config, seed, rep)
        row["error"] = ""
        return row, dump, log
    except Exception as e:
        logger.warning("seed %d (repeat %d) failed: %s: %s", seed, rep,
                       e.__class__.__name__, e)
        row = {"seed": seed, "repeat": rep, "success": False,
               "error": f"{e.__class__.__name__}: {e}"}
        return row, None, []


def _sweep(config):
    jobs = [(seed, rep) for seed in sorted(config.seeds)
            for rep in range(config.repeat)]
    if config.workers == 1:
        results = [run_seed(config, seed, rep) for seed, rep in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            futures = [executor.submit(run_seed, config, seed, rep)
                       for seed, rep in jobs]
            results = [future.result() for future in futures]
    return jobs, results


def _summary(df):
    done = df[df["error"] == ""] if "error" in df else df
    doc = {"runs": int(len(df)), "completed": int(len(done)),
           "failed": int(len(df) - len(done)),
           "success_rate": float(df["success"].mean()) if len(df) else 0.0}
    if len(done):
        doc.update(
            mean_oracle_calls=float(done["oracle_calls"].mean()),
            max_oracle_calls=int(done["oracle_calls"].max()),
            mean_exploratory_samples=float(
                done["exploratory_samples"].mean()))
    return doc


def run_experiment(config):
    """Run every seed of ``config`` and write the reports.

    Files written below ``config.out``: ``config.json``, ``runs.csv`` (one
    row per seed and repetition), ``summary.json``, and per run either
    ``dumps/<seed>-<repeat>.json`` with ``logs/<seed>-<repeat>.jsonl`` (the
    oracle call log) or the CubeGame transcript in ``logs/``.

    Returns
    -------
    df : pandas.DataFrame
        Per-run rows, sorted by seed.
    summary : dict
        Aggregates; ``failed`` counts runs that raised.

    """
    check_environment(config)
    out = Path(config.out)
    logger.info("running %d seeds × %d in %s mode", len(config.seeds),
                config.repeat, config.mode)
    jobs, results = _sweep(config)
    config.to_json(out / "config.json")
    rows = []
    for (seed, rep), (row, dump, log) in zip(jobs, results):
        rows.append(row)
        name = f"{seed}-{rep}"
        if dump is not None:
            space = dump.pop("space")
            write_constraints(space, out / "dumps" / f"{name}.json", **dump)
        write_jsonl(log, out / "logs" / f"{name}.jsonl")
    df = pd.DataFrame(rows)
    write_report(df, out / "runs.csv")
    summary = _summary(df)
    write_json(summary, out / "summary.json")
    if summary["failed"]:
        logger.warning("%d of %d runs failed", summary["failed"],
                       summary["runs"])
    logger.info("success rate %.3f over %d runs", summary["success_rate"],
                summary["runs"])
    return df, summary


def compare_oracle_budgets(config):
    """Sweep the oracle budget grid and write ``budgets.csv``.

    Returns
    -------
    pandas.DataFrame
        Columns budget, success_rate, mean_samples, mean_oracle_calls and
        failed, the number of runs that raised.

    """
    if not config.budgets:
        raise InvalidConfig("compare_oracle_budgets needs a budget grid")
    check_environment(config)
    rows = []
    for budget in config.budgets:
        sub = replace(config, oracle_budget=int(budget), budgets=None)
        _, results = _sweep(sub)
        df = pd.DataFrame([row for row, _, _ in results])
        samples = df.get("exploratory_samples", pd.Series(dtype=float))
        calls = df.get("oracle_calls", pd.Series(dtype=float))
        rows.append({"budget": int(budget),
                     "success_rate": float(df["success"].mean()),
                     "mean_samples": float(samples.mean()),
                     "mean_oracle_calls": float(calls.mean()),
                     "failed": int((df["error"] != "").sum())})
        logger.info("budget %d: success rate %.3f", budget,
                    rows[-1]["success_rate"])
    curve = pd.DataFrame(
        rows, columns=["budget", "success_rate", "mean_samples",
                       "mean_oracle_calls", "failed"])
    write_report(curve, Path(config.out) / "budgets.csv")
    return curve


def verify_run(run_dir):
    """Re-check every constraint dump of a run directory.

    Each dump is checked for retention of the realizing parameter,
    ``|⟨Δ̃, 1 ⊕ θ°⟩| ≤ τ`` on every constraint, and, for exact-mode runs,
    with :func:`delphi.exact.check_delphi_eluder` at ``ε̄_eval``.

    Returns
    -------
    pandas.DataFrame
        One row per dump: run, constraints, retained, eluder and
        first_violation; ``eluder`` is None for runs with sampled
        measurements.

    """
    run_dir = Path(run_dir)
    paths = sorted((run_dir / "dumps").glob("*.json"))
    logger.info("verifying %d dumps in %s", len(paths), run_dir)
    rows = []
    for path in paths:
        space, extra = read_constraints(path)
        theta_star = np.asarray(extra["theta_star"], dtype=float)
        retained = all(abs(con.residual(theta_star)) <= con.tau + 1e-9
                       for con in space.constraints)
        row = {"run": path.stem, "constraints": len(space),
               "retained": retained, "eluder": None,
               "first_violation": None}
        if extra.get("exact"):
            stats = RunStats(constraints=space, records=extra["records"])
            check = check_delphi_eluder(stats, theta_star,
                                        extra["eps_bar_eval"])
            row.update(eluder=check.ok, first_violation=check.first_violation)
        if not retained or row["eluder"] is False:
            logger.warning("dump %s failed verification: %s", path.name,
                           json.dumps(row))
        rows.append(row)
    return pd.DataFrame(rows, columns=["run", "constraints", "retained",
                                       "eluder", "first_violation"])

