"""Exactly rounded accumulation over streamed arrays.

``math.fsum`` is exactly rounded, so the result does not depend on how the
terms were split into chunks.  That gives bit-reproducible totals for any
partition of an enumeration.
"""
from __future__ import annotations

import itertools
import math
from typing import Iterable

import numpy as np


def exact_sum(chunks: Iterable[np.ndarray]) -> float:
    return math.fsum(itertools.chain.from_iterable(np.asarray(c, dtype=float).ravel().tolist()
                                                   for c in chunks))


def grouped_exact_sum(keys: np.ndarray, values: np.ndarray, size: int) -> np.ndarray:
    """Exactly rounded ``bincount(keys, values)`` for integer keys in [0, size)."""
    out = np.zeros(size)
    if keys.size == 0:
        return out
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    values = values[order]
    bounds = np.searchsorted(keys, np.arange(size + 1))
    for i in range(size):
        lo, hi = bounds[i], bounds[i + 1]
        if hi > lo:
            out[i] = math.fsum(values[lo:hi].tolist())
    return out
