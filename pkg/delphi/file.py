"""File reading/writing helpers."""

__all__ = [
    "read_constraints",
    "read_json",
    "read_jsonl",
    "read_report",
    "read_tabular_json",
    "write_constraints",
    "write_json",
    "write_jsonl",
    "write_report",
    "write_tabular_json",
]

import json
from pathlib import Path

import numpy as np
import pandas as pd

from delphi.errors import InvalidConfig
from delphi.logger import get_logger, logging

FLOAT_FORMAT = "%.10g"


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    elif isinstance(obj, np.floating):
        return float(obj)
    elif isinstance(obj, np.ndarray):
        return obj.tolist()
    elif isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(doc, path, log_level=logging.INFO):
    """Write ``doc`` as indented JSON with sorted keys."""
    logger = get_logger("write_json", log_level)
    path = Path(path)
    logger.info("writing file: %s", path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        json.dump(doc, f, indent=2, sort_keys=True, default=_default)
        f.write("\n")


def read_json(path, log_level=logging.INFO):
    """Read a JSON document; malformed content raises InvalidConfig."""
    logger = get_logger("read_json", log_level)
    logger.info("reading file: %s", path)
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise InvalidConfig(f"malformed JSON in {path}: {e}") from e


def write_jsonl(records, path, log_level=logging.INFO):
    """Write a list of dicts as JSON-lines, one record per line.

    Used for the oracle call log and CubeGame transcripts.
    """
    logger = get_logger("write_jsonl", log_level)
    path = Path(path)
    logger.info("writing %d records: %s", len(records), path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame.from_records(list(records))
    if len(df) == 0:
        path.write_text("")
        return
    df.to_json(path, orient="records", lines=True)


def read_jsonl(path, log_level=logging.INFO):
    """Read JSON-lines into a DataFrame."""
    logger = get_logger("read_jsonl", log_level)
    logger.info("reading file: %s", path)
    if Path(path).stat().st_size == 0:
        return pd.DataFrame()
    return pd.read_json(path, orient="records", lines=True)


def write_report(df, path, log_level=logging.INFO):
    """Write a report DataFrame to CSV.

    Floats use a fixed format, so identical runs give identical files.
    """
    logger = get_logger("write_report", log_level)
    path = Path(path)
    logger.info("writing %d rows: %s", len(df), path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT,
              lineterminator="\n")


def read_report(path, log_level=logging.INFO):
    """Read a CSV report."""
    logger = get_logger("read_report", log_level)
    logger.info("reading file: %s", path)
    return pd.read_csv(path)


def write_tabular_json(mdp, path, log_level=logging.INFO):
    """Write a TabularMdp in the tabular JSON schema."""
    write_json(mdp.to_dict(), path, log_level)


def read_tabular_json(path, seed=None, log_level=logging.INFO):
    """Read a TabularMdp from the tabular JSON schema.

    Parameters
    ----------
    path : str or Path
        JSON file with keys H, A, states, P, r, start and optionally phi.
    seed : int, optional
        Simulator seed.
    log_level : int, optional
        Level used by logging module; default is 20 (logging.INFO)

    Returns
    -------
    delphi.core.TabularMdp

    """
    from delphi.core import TabularMdp
    doc = read_json(path, log_level)
    return TabularMdp.from_dict(doc, seed=seed)


def write_constraints(space, path, log_level=logging.INFO, **extra):
    """Dump a VersionSpace, with optional extra keys, to JSON."""
    doc = space.to_dict()
    doc.update(extra)
    write_json(doc, path, log_level)


def read_constraints(path, log_level=logging.INFO):
    """Read a constraint dump.

    Returns
    -------
    space : VersionSpace
    extra : dict
        Keys stored next to the constraints.

    """
    from delphi.version_space import VersionSpace
    doc = read_json(path, log_level)
    space = VersionSpace.from_dict(doc)
    extra = {k: v for k, v in doc.items()
             if k not in ("B", "d", "max_constraints", "constraints")}
    return space, extra
