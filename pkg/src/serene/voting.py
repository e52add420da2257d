"""Client-side replication: pool selection and strict-majority voting."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernel
from .rng import randbelow

__all__ = ["InsufficientWorkersError", "PoolDispatch", "select_pool", "majority"]


class InsufficientWorkersError(ValueError):
    """Fewer candidates than the requested pool size."""


@dataclass
class PoolDispatch:
    """One task sent to one k-worker pool, with the votes collected so far."""

    task: int
    pool: tuple[int, ...]
    dispatch_time: float
    votes: list = field(default_factory=list)


def _sample_k(state, scratch, n_cand, k, out):
    """Uniform k-subset via partial Fisher-Yates over scratch[:n_cand]."""
    for i in range(k):
        j = i + randbelow(state, n_cand - i)
        tmp = scratch[i]
        scratch[i] = scratch[j]
        scratch[j] = tmp
        out[i] = scratch[i]


def _majority_value(votes, n):
    """(found, value) where value holds a strict majority of votes[:n]."""
    for i in range(n):
        v = votes[i]
        count = 0
        for j in range(n):
            if votes[j] == v:
                count += 1
        if 2 * count > n:
            return True, v
    return False, votes[0]


sample_k = kernel(_sample_k)
majority_value = kernel(_majority_value)


def select_pool(state: np.ndarray, candidates, k: int) -> tuple[int, ...]:
    """Uniform random k-subset of ``candidates`` (order canonicalized first)."""
    cand = sorted(candidates)
    if len(cand) < k:
        raise InsufficientWorkersError(
            f"need {k} workers, only {len(cand)} candidates"
        )
    scratch = np.asarray(cand, dtype=np.int64)
    out = np.empty(k, dtype=np.int64)
    sample_k(state, scratch, len(cand), k, out)
    return tuple(int(w) for w in out)


def majority(votes, k: int):
    """Value held by more than k/2 of the votes, or None without one.

    ``votes`` may be raw values or objects with a ``value`` attribute.
    Permutation invariant by construction.
    """
    values = [getattr(v, "value", v) for v in votes]
    if len(values) != k:
        raise ValueError(f"expected {k} votes, got {len(values)}")
    value, count = Counter(values).most_common(1)[0]
    if 2 * count > k:
        return value
    return None
