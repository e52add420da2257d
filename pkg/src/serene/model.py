"""Shared domain types: workers, tasks, result values.

Result values are opaque 64-bit tokens with equality as the only meaningful
operation. The correct result of a task is a hash of its sequence number;
an error (honest slip or naive garbage) is a fresh random value; the
colluding ring's agreed wrong value is a hash of the sequence salted with a
per-run ring salt, so every ring member independently "computes" the same
wrong answer while two uncoordinated workers essentially never agree on one
(collision odds ~2**-64).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ._backend import kernel
from .config import ConfigError, ScenarioConfig
from .rng import U64, hash_u64, next_u64, randbelow

__all__ = [
    "WorkerClass",
    "TaskOrigin",
    "Vote",
    "build_roster",
    "correct_value",
    "ring_value",
    "wrong_value",
    "derive_ring_salt",
]


class WorkerClass(enum.IntEnum):
    HONEST = 0
    NAIVE = 1
    COLLUDING = 2


class TaskOrigin(enum.IntEnum):
    """Why a dispatch went out; genuine tasks keep this tag when re-sent as probes."""

    GENUINE = 0
    CVT_PROBE = 1
    MITIGATION_PROBE = 2
    REDISPATCH = 3


@dataclass(frozen=True)
class Vote:
    """One worker's recorded answer for one task."""

    task: int
    worker: int
    value: int
    arrival_time: float


_ONE = U64(1)


def _correct_value(seq):
    return hash_u64(U64(seq))


def _ring_value(seq, salt):
    v = hash_u64(U64(seq) ^ salt)
    if v == hash_u64(U64(seq)):  # never let the agreed wrong value be the right one
        v = v ^ _ONE
    return v


def _wrong_value(state, seq):
    c = hash_u64(U64(seq))
    v = next_u64(state)
    while v == c:
        v = next_u64(state)
    return v


correct_value = kernel(_correct_value)
ring_value = kernel(_ring_value)
wrong_value = kernel(_wrong_value)


def derive_ring_salt(state: np.ndarray) -> np.uint64:
    """Nonzero salt shared by the colluding ring, drawn from the run stream."""
    salt = next_u64(state)
    if salt == U64(0):
        salt = _ONE
    return U64(salt)


def build_roster(config: ScenarioConfig, state: np.ndarray) -> np.ndarray:
    """Assign ground-truth classes: a seeded random permutation of the counts.

    Colluding count is rounded half up first, naive second, the remainder is
    honest. Returns an int8 array indexed by worker id; the verifier never
    sees it.
    """
    n = config.n_workers
    n_col = config.n_colluding()
    n_naive = config.n_naive()
    if n_col + n_naive > n - 2 and config.colluding_fraction + config.naive_fraction <= 1.0:
        raise ConfigError("class fractions leave fewer than 2 honest workers")

    order = np.arange(n, dtype=np.int64)
    for i in range(n - 1):  # Fisher-Yates on the shared stream
        j = i + int(randbelow(state, n - i))
        order[i], order[j] = order[j], order[i]

    classes = np.full(n, int(WorkerClass.HONEST), dtype=np.int8)
    classes[order[:n_col]] = int(WorkerClass.COLLUDING)
    classes[order[n_col:n_col + n_naive]] = int(WorkerClass.NAIVE)
    return classes
