"""Collusion-verification-task table and the constant-time detect step.

The table holds up to L previously verified genuine tasks. Each entry keeps
the majority value observed for the task (or NULL) and every result any
worker has returned for it. A probe re-sends an entry's task to k workers
drawn from those with no recorded result; a probe vote triggers detection
iff it disagrees with the entry's majority while matching a result some
other worker already returned — two coordinated workers agreeing on a
non-majority value.

Each detect step costs a bounded number of value comparisons plus one
linear scan of the entry row; no graph state is touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernel
from .rng import randbelow
from .voting import sample_k

__all__ = ["CvtEntry", "CvtTable", "REPLACEMENT_NEEDED"]


def _cvt_find(tasks, size, seq):
    for i in range(size):
        if tasks[i] == seq:
            return i
    return -1


def _cvt_set_entry(tasks, vals, nulls, rec, has, row, seq, maj_has, maj_val):
    tasks[row] = seq
    vals[row] = maj_val
    nulls[row] = not maj_has
    for j in range(has.shape[1]):
        has[row, j] = False
        rec[row, j] = 0


def _cvt_unprobed(has, row, out):
    """Workers with no recorded result for this entry (the probe pool candidates)."""
    n = 0
    for j in range(has.shape[1]):
        if not has[row, j]:
            out[n] = j
            n += 1
    return n


def _cvt_detect(vals, nulls, rec, has, row, worker, value):
    """Detect step for one probe vote; returns +1 on collusion, else -1.

    On -1 the vote is recorded into the entry (setting the majority first if
    it was NULL). On +1 nothing is recorded; the caller wipes the table and
    hands the entry over as mitigation evidence.
    """
    if nulls[row] or value == vals[row]:
        if nulls[row]:
            vals[row] = value
            nulls[row] = False
        rec[row, worker] = value
        has[row, worker] = True
        return -1
    for j in range(has.shape[1]):
        if has[row, j] and rec[row, j] == value:
            return 1
    rec[row, worker] = value
    has[row, worker] = True
    return -1


cvt_find = kernel(_cvt_find)
cvt_set_entry = kernel(_cvt_set_entry)
cvt_unprobed = kernel(_cvt_unprobed)
cvt_detect = kernel(_cvt_detect)


REPLACEMENT_NEEDED = "replacement-needed"


@dataclass
class CvtEntry:
    """View of one table row: task, majority (None = NULL), recorded results."""

    task: int
    majority: int | None
    recorded: dict[int, int]


class CvtTable:
    """Fixed-capacity table of collusion verification tasks.

    This wrapper drives the same array kernels the simulation loop uses;
    it exists for direct use and testing at the operation level.
    """

    def __init__(self, capacity: int, n_workers: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.n_workers = n_workers
        self.size = 0
        self.tasks = np.full(capacity, -1, dtype=np.int64)
        self.values = np.zeros(capacity, dtype=np.uint64)
        self.nulls = np.ones(capacity, dtype=np.bool_)
        self.recorded = np.zeros((capacity, n_workers), dtype=np.uint64)
        self.has = np.zeros((capacity, n_workers), dtype=np.bool_)
        # per-row multiset of recorded values so membership is one hash
        # lookup: the detect step costs O(1) comparisons regardless of N
        self._value_counts: list[dict[int, int]] = [dict() for _ in range(capacity)]

    def entry(self, row: int) -> CvtEntry:
        rec = {
            j: int(self.recorded[row, j])
            for j in range(self.n_workers)
            if self.has[row, j]
        }
        maj = None if self.nulls[row] else int(self.values[row])
        return CvtEntry(int(self.tasks[row]), maj, rec)

    def admit(self, task: int, majority: int | None, votes=None, replace_row: int | None = None) -> bool:
        """Insert a verified genuine task; rejects duplicates.

        ``votes`` is the (worker, value) iterable from the task's original
        verification; those results are recorded immediately, which is what
        keeps the probe pool equal to "workers that never received the
        task". ``replace_row`` evicts that row instead of appending.
        """
        if cvt_find(self.tasks, self.size, task) >= 0:
            return False
        if replace_row is None:
            if self.size >= self.capacity:
                raise ValueError("table full; admit with replace_row")
            row = self.size
            self.size += 1
        else:
            row = replace_row
        maj_has = majority is not None
        cvt_set_entry(
            self.tasks, self.values, self.nulls, self.recorded, self.has,
            row, task, maj_has, np.uint64(majority if maj_has else 0),
        )
        self._value_counts[row] = {}
        for worker, value in votes or ():
            self._record(row, int(worker), int(value))
        return True

    def _record(self, row: int, worker: int, value: int) -> None:
        self.recorded[row, worker] = np.uint64(value)
        self.has[row, worker] = True
        counts = self._value_counts[row]
        counts[value] = counts.get(value, 0) + 1

    def select_probe(self, state: np.ndarray, k: int):
        """Random entry and a k-subset of its unprobed workers.

        Returns ``(task, pool)`` or ``(REPLACEMENT_NEEDED, task)`` when the
        entry has too few unprobed workers left to form a pool.
        """
        if self.size == 0:
            return None
        row = int(randbelow(state, self.size))
        out = np.empty(self.n_workers, dtype=np.int64)
        n_free = cvt_unprobed(self.has, row, out)
        if n_free <= k:
            return (REPLACEMENT_NEEDED, int(self.tasks[row]))
        pool = np.empty(k, dtype=np.int64)
        sample_k(state, out[:n_free].copy(), n_free, k, pool)
        return (int(self.tasks[row]), tuple(int(w) for w in pool))

    def row_of(self, task: int) -> int:
        return int(cvt_find(self.tasks, self.size, task))

    def detect(self, task: int, worker: int, value: int) -> int:
        """Run the detect step for a probe vote; votes for evicted entries return -1.

        Mirrors the array kernel's decision exactly but resolves membership
        through the per-row value index, so the work per call is a couple of
        scalar comparisons plus one hash lookup, independent of N.
        """
        row = self.row_of(task)
        if row < 0:
            return -1
        value = int(value)
        if self.nulls[row] or value == int(self.values[row]):
            if self.nulls[row]:
                self.values[row] = np.uint64(value)
                self.nulls[row] = False
            self._record(row, worker, value)
            return -1
        if self._value_counts[row].get(value, 0) > 0:
            return 1
        self._record(row, worker, value)
        return -1

    def wipe(self) -> None:
        self.size = 0
