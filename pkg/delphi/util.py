"""Miscellaneous utility functions that don't fit anywhere else."""

__all__ = ["abbr_str", "one_plus", "as_vector", "stable_hash"]

import zlib

import numpy as np


def abbr_str(lst, limit=15):
    """Return str of list that is abbreviated (if necessary)."""
    if isinstance(lst, (list, tuple)):
        lst = list(lst)
    elif isinstance(lst, np.ndarray):
        lst = [float(f"{x:.6g}") for x in lst.ravel()]
    else:
        raise TypeError(type(lst))
    if len(lst) <= limit:
        res = ', '.join(str(x) for x in lst)
    else:
        left = limit // 2
        right = left
        if left + right != limit:
            left += 1
        res = ', '.join(
            [str(x) for x in lst[:left]] + ['...'] +
            [str(x) for x in lst[-right:]])
    return f"[{res}]"


def as_vector(values, length=None, name="vector"):
    """Return a 1-d float array, optionally checking its length."""
    from delphi.errors import DimensionError
    vec = np.asarray(values, dtype=float)
    if vec.ndim != 1:
        raise DimensionError(f"{name} must be 1-d; found shape {vec.shape}")
    if length is not None and len(vec) != length:
        raise DimensionError(
            f"{name} must have length {length}; found {len(vec)}")
    return vec


def one_plus(theta):
    """Return ``1 ⊕ θ``, the parameter paired with a TD vector."""
    theta = np.asarray(theta, dtype=float)
    return np.concatenate(([1.0], theta))


def stable_hash(obj):
    """Return a 32-bit hash of ``repr(obj)`` that is stable across runs."""
    return zlib.crc32(repr(obj).encode("utf-8"))
