"""Worker vote generation: honest, naive-malicious, and coordinated colluding.

The colluding ring colludes on a task iff (a) collusion is active, (b) ring
members hold a strict majority of the pool, (c) no pooled ring member has
seen the task before (the evasive rule), and (d) a Bernoulli(p_collude)
draw succeeds. The draw is a single joint coin per (task, pool) by default;
``joint_collusion=False`` switches to independent per-worker coins. Either
way every pooled ring member records the task as seen afterwards, so a
repeat delivery is always answered honestly.

The array-level functions double as the kernels used inside the simulation
hot loops; the wrappers at the bottom expose the same logic over plain
Python containers for direct use and testing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernel
from .model import WorkerClass, correct_value, ring_value, wrong_value
from .rng import random01

__all__ = [
    "ColluderState",
    "CollusionDecision",
    "honest_vote",
    "naive_vote",
    "ring_decide",
    "cast_pool_votes",
]

_COLLUDING = int(WorkerClass.COLLUDING)
_HONEST = int(WorkerClass.HONEST)


def _honest_vote(state, seq, epsilon):
    """Correct value with probability 1 - epsilon, else a fresh wrong value."""
    if epsilon > 0.0 and random01(state) < epsilon:
        return wrong_value(state, seq)
    return correct_value(seq)


honest_vote = kernel(_honest_vote)


def _naive_vote(state, seq):
    """Always a fresh random incorrect value; stateless across calls."""
    return wrong_value(state, seq)


naive_vote = kernel(_naive_vote)


def _ring_status(pool, n_pool, classes, seen, ring_seen, shared_memory, seq):
    """(ring members in pool, any pooled ring member saw the task)."""
    n_ring = 0
    any_seen = False
    for i in range(n_pool):
        w = pool[i]
        if classes[w] == _COLLUDING:
            n_ring += 1
            if shared_memory:
                if ring_seen[seq]:
                    any_seen = True
            elif seen[w, seq]:
                any_seen = True
    return n_ring, any_seen


ring_status = kernel(_ring_status)


def _mark_seen(pool, n_pool, classes, seen, ring_seen, shared_memory, seq):
    for i in range(n_pool):
        w = pool[i]
        if classes[w] == _COLLUDING:
            seen[w, seq] = True
            if shared_memory:
                ring_seen[seq] = True


mark_seen = kernel(_mark_seen)


def _cast_pool_votes(
    state,
    votes_out,
    pool,
    n_pool,
    classes,
    seen,
    ring_seen,
    shared_memory,
    joint,
    seq,
    t_dispatch,
    t_act,
    p_collude,
    epsilon,
    salt,
):
    """Fill votes_out[:n_pool] for one dispatch; returns True if the ring colluded.

    Draw order is fixed (joint coin, then per-member value draws in pool
    order) so traces are reproducible. Colluders answering honestly return
    the exactly-correct value (no epsilon slip).
    """
    n_ring, any_seen = ring_status(pool, n_pool, classes, seen, ring_seen, shared_memory, seq)
    eligible = (2 * n_ring > n_pool) and (not any_seen) and (t_dispatch >= t_act)
    joint_collude = False
    if eligible and joint:
        joint_collude = random01(state) < p_collude

    colluded = False
    for i in range(n_pool):
        w = pool[i]
        c = classes[w]
        if c == _COLLUDING:
            if joint:
                collude = joint_collude
            else:
                collude = eligible and (random01(state) < p_collude)
            if collude:
                votes_out[i] = ring_value(seq, salt)
                colluded = True
            else:
                votes_out[i] = correct_value(seq)
        elif c == _HONEST:
            votes_out[i] = honest_vote(state, seq, epsilon)
        else:
            votes_out[i] = naive_vote(state, seq)

    mark_seen(pool, n_pool, classes, seen, ring_seen, shared_memory, seq)
    return colluded


cast_pool_votes = kernel(_cast_pool_votes)


# --- Python-facing view ------------------------------------------------------


@dataclass
class ColluderState:
    """Single-ring bookkeeping: membership, per-worker task memory, start time."""

    ring: frozenset[int]
    active_from: float = 0.0
    shared_memory: bool = False
    seen_tasks: dict[int, set[int]] = field(default_factory=dict)

    def saw(self, worker: int, task: int) -> bool:
        if self.shared_memory:
            return any(task in s for s in self.seen_tasks.values())
        return task in self.seen_tasks.get(worker, ())

    def mark(self, worker: int, task: int) -> None:
        self.seen_tasks.setdefault(worker, set()).add(task)


@dataclass(frozen=True)
class CollusionDecision:
    """Outcome of a ring decision: coordinate on ``value`` or act honest."""

    colluding: bool
    value: int | None = None

    @classmethod
    def act_honest(cls) -> "CollusionDecision":
        return cls(False)

    @classmethod
    def collude_with(cls, value: int) -> "CollusionDecision":
        return cls(True, int(value))


def ring_decide(
    state: np.ndarray,
    task: int,
    pool,
    colluders: ColluderState,
    p_collude: float,
    now: float,
    salt,
) -> CollusionDecision:
    """Joint ring decision for a pool receiving ``task`` at time ``now``.

    Marks the task as seen for every pooled ring member regardless of the
    outcome.
    """
    members = list(pool)
    ring_in_pool = [w for w in members if w in colluders.ring]
    eligible = (
        2 * len(ring_in_pool) > len(members)
        and now >= colluders.active_from
        and not any(colluders.saw(w, task) for w in ring_in_pool)
    )
    decision = CollusionDecision.act_honest()
    if eligible and random01(state) < p_collude:
        decision = CollusionDecision.collude_with(ring_value(task, salt))
    for w in ring_in_pool:
        colluders.mark(w, task)
    return decision
