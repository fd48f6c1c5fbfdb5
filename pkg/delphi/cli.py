"""Command-line interface.

Examples::

    delphi run config.json --seed 0 1 2 --out runs/random
    delphi cubegame cube.json --override oracle_budget=4
    delphi budgets cube.json --override 'budgets=[0, 2, 4]'
    delphi verify runs/random

Exit codes are 0 on success, 1 when some run failed or did not verify, and
2 for configuration errors.
"""

__all__ = ["main", "parse_override"]

import argparse
import json
import sys
from dataclasses import fields

from delphi._version import version
from delphi.errors import InvalidConfig
from delphi.experiment import (
    ExperimentConfig,
    compare_oracle_budgets,
    run_experiment,
    verify_run,
)
from delphi.file import read_json
from delphi.logger import logging, module_logger

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_CONFIG = 2

CONFIG_FIELDS = {f.name for f in fields(ExperimentConfig)}


def parse_override(text):
    """Split ``key=value``; the value is parsed as JSON if possible.

    Examples
    --------
    >>> parse_override("n_eval=500")
    ('n_eval', 500)
    >>> parse_override("threshold_rule=pseudocode")
    ('threshold_rule', 'pseudocode')
    """
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise InvalidConfig(f"override must look like key=value; found {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _load_config(args, mode=None):
    doc = read_json(args.config)
    if not isinstance(doc, dict):
        raise InvalidConfig("configuration must be a JSON object")
    doc = dict(doc)
    env = doc.get("environment")
    if mode is None and "mode" not in doc and isinstance(env, dict) and \
            env.get("kind") == "cubegame":
        mode = "cubegame"
    if mode is not None:
        doc["mode"] = mode
    overrides = dict(doc.get("overrides") or {})
    for text in args.override or []:
        key, value = parse_override(text)
        if key in CONFIG_FIELDS:
            doc[key] = value
        else:
            overrides[key] = value
    doc["overrides"] = overrides
    if args.seed:
        doc["seeds"] = args.seed
    if args.out:
        doc["out"] = args.out
    if args.workers:
        doc["workers"] = args.workers
    return ExperimentConfig.from_dict(doc)


def _cmd_run(args, mode=None):
    config = _load_config(args, mode)
    _, summary = run_experiment(config)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_FAILURES if summary["failed"] else EXIT_OK


def _cmd_budgets(args):
    config = _load_config(args)
    curve = compare_oracle_budgets(config)
    print(curve.to_string(index=False))
    return EXIT_FAILURES if curve["failed"].any() else EXIT_OK


def _cmd_verify(args):
    df = verify_run(args.run_dir)
    print(df.to_string(index=False))
    bad = (~df["retained"].astype(bool)) | (df["eluder"] == False)  # noqa: E712
    return EXIT_FAILURES if bad.any() else EXIT_OK


def _parser():
    parser = argparse.ArgumentParser(
        prog="delphi",
        description="Run expert-assisted learner experiments.")
    parser.add_argument("--version", action="version", version=version)
    parser.add_argument(
        "--log-level", default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level (default: INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    def config_command(name, help):
        cmd = sub.add_parser(name, help=help)
        cmd.add_argument("config", help="JSON experiment configuration")
        cmd.add_argument("--seed", type=int, nargs="+",
                         help="Seeds, replacing the configured list")
        cmd.add_argument("--out", help="Output directory")
        cmd.add_argument("--workers", type=int, help="Worker processes")
        cmd.add_argument(
            "--override", action="append", metavar="KEY=VALUE",
            help="Configuration field or hyperparameter override; "
                 "may be repeated")
        return cmd

    config_command("run", "run a learner sweep")
    config_command("cubegame", "run the greedy CubeGame planner")
    config_command("budgets", "compare oracle budgets")
    verify = sub.add_parser("verify", help="re-check a run directory")
    verify.add_argument("run_dir", help="Output directory of a run")
    return parser


def main(argv=None):
    """Entry point; returns the exit code."""
    args = _parser().parse_args(argv)
    module_logger.setLevel(getattr(logging, args.log_level))
    try:
        if args.command == "run":
            return _cmd_run(args)
        elif args.command == "cubegame":
            return _cmd_run(args, mode="cubegame")
        elif args.command == "budgets":
            return _cmd_budgets(args)
        return _cmd_verify(args)
    except (InvalidConfig, FileNotFoundError) as e:
        module_logger.error("configuration error: %s", e)
        print(f"delphi: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
