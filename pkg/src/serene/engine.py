"""Deterministic seeded discrete-event simulator.

One run owns preallocated arrays for every genuine dispatch (one per slot),
the CVT state, the probe log, and the colluders' task memory. The detection
loop runs compiled; mitigation phases execute as a sequential state machine
that interleaves verification dispatches with the ongoing genuine stream,
one slot each. Same (config, scheme, seed) always yields the same trace.
"""

from __future__ import annotations

import enum
import math
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import ScenarioConfig
from .model import WorkerClass, build_roster, derive_ring_salt
from .rng import new_state, uniform

__all__ = [
    "Event",
    "EventQueue",
    "DetectionEvent",
    "DetectionEvidence",
    "MitigationReport",
    "RunTrace",
    "SCHEMES",
    "run",
    "run_batch",
]

SCHEMES = ("serene", "serene-prt", "serene-prt-g1", "sne8", "sne12")
_SERENE_FAMILY = ("serene", "serene-prt", "serene-prt-g1")


class EventKind(enum.IntEnum):
    GENERATE_TASK = 0
    DELIVER_TASK = 1
    DELIVER_VOTE = 2
    DETECT_TICK = 3
    MITIGATION_STEP = 4
    COLLUSION_ACTIVATE = 5
    SIM_END = 6


@dataclass(frozen=True)
class Event:
    """A timestamped simulator event; ordering is (time, insertion sequence)."""

    time: float
    kind: EventKind
    payload: tuple = ()


class EventQueue:
    """Min-heap of events; ties broken by insertion order."""

    def __init__(self):
        import heapq

        self._heapq = heapq
        self._heap: list[tuple[float, int, Event]] = []
        self._counter = 0

    def push(self, event: Event) -> None:
        self._heapq.heappush(self._heap, (event.time, self._counter, event))
        self._counter += 1

    def pop(self) -> Event:
        return self._heapq.heappop(self._heap)[2]

    def __len__(self) -> int:
        return len(self._heap)


@dataclass(frozen=True)
class DetectionEvent:
    """Structured record of one collusion detection."""

    sim_time: float
    task: int
    triggering_workers: frozenset[int]
    epoch_count: int


@dataclass(frozen=True)
class DetectionEvidence:
    """Snapshot of the triggering CVT entry, kept for the greedy fallback."""

    task: int
    majority: int | None
    minority_workers: frozenset[int]
    majority_workers: frozenset[int]
    recorded: dict[int, int]


@dataclass
class MitigationReport:
    """Outcome and phase metadata of one mitigation pass."""

    variant: str
    trigger_time: float
    complete: bool = False
    inconclusive: bool = False
    partition_method: str | None = None
    malicious: frozenset = frozenset()
    g1_initial: frozenset = frozenset()
    g2_initial: frozenset = frozenset()
    tr_pools: int = 0
    tr_ready_time: float | None = None
    tt_size: int = 0
    scores: dict[int, float] = field(default_factory=dict)
    case: int | None = None
    honest: frozenset = frozenset()
    colluding: frozenset = frozenset()
    flagged: frozenset = frozenset()
    final_time: float | None = None
    graph_edges: list = field(default_factory=list)
    moves: list = field(default_factory=list)


@dataclass
class RunTrace:
    """Everything one run produced, including ground truth for metrics."""

    scheme: str
    seed: int
    config: ScenarioConfig
    roster: np.ndarray
    ground_truth_collusion: bool
    activation_time: float | None
    detections: list[DetectionEvent]
    reports: list[MitigationReport]
    end_time: float
    generated_tasks: int
    task_log: dict
    probe_log: dict
    mitigation_dispatches: list
    sne_recluster_times: list[float]
    wall_seconds: float

    @property
    def first_detection(self) -> DetectionEvent | None:
        return self.detections[0] if self.detections else None

    @property
    def first_report(self) -> MitigationReport | None:
        return self.reports[0] if self.reports else None


class World:
    """Preallocated mutable state for a single run."""

    def __init__(self, config: ScenarioConfig, scheme: str, seed: int):
        config.validate()
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
        self.config = config
        self.scheme = scheme
        self.seed = int(seed)
        self.n = config.n_workers
        self.k = config.pool_size
        self.slot_dt = 1.0 / config.task_rate
        self.total_slots = int(config.task_rate * config.sim_end)
        self.rtt_lo = config.rtt_min_ms / 1000.0
        self.rtt_hi = config.rtt_max_ms / 1000.0

        self.rs = new_state(seed)
        self.classes = build_roster(config, self.rs)
        self.salt = derive_ring_salt(self.rs)
        self.n_colluding = int(np.sum(self.classes == int(WorkerClass.COLLUDING)))
        if self.n_colluding >= 1:
            lo, hi = config.collusion_start_window
            self.t_act = float(uniform(self.rs, lo, hi))
        else:
            self.t_act = math.inf
        self.ground_truth = self.n_colluding >= 2

        n, k, slots = self.n, self.k, self.total_slots
        self.seen = np.zeros((n, slots), dtype=np.bool_)
        self.ring_seen = np.zeros(slots, dtype=np.bool_)
        self.g_pool = np.zeros((slots, k), dtype=np.int64)
        self.g_votes = np.zeros((slots, k), dtype=np.uint64)
        self.g_arr = np.zeros((slots, k), dtype=np.float64)
        self.g_dispatch = np.zeros(slots, dtype=np.float64)
        self.g_done = np.zeros(slots, dtype=np.float64)
        self.g_maj = np.zeros(slots, dtype=np.uint64)
        self.g_maj_has = np.zeros(slots, dtype=np.bool_)
        self.g_colluded = np.zeros(slots, dtype=np.bool_)

        r2_cap = 4096
        self.r2_of = np.full(r2_cap, -1, dtype=np.int64)
        self.r2_pool = np.zeros((r2_cap, k), dtype=np.int64)
        self.r2_votes = np.zeros((r2_cap, k), dtype=np.uint64)
        self.r2_arr = np.zeros((r2_cap, k), dtype=np.float64)
        self.r2_idx = np.full(slots, -1, dtype=np.int64)
        self.r2_count = 0

        self.cvt_cap = config.resolved_cvt_len()
        self.c_task = np.full(self.cvt_cap, -1, dtype=np.int64)
        self.c_vals = np.zeros(self.cvt_cap, dtype=np.uint64)
        self.c_nulls = np.ones(self.cvt_cap, dtype=np.bool_)
        self.c_rec = np.zeros((self.cvt_cap, n), dtype=np.uint64)
        self.c_has = np.zeros((self.cvt_cap, n), dtype=np.bool_)
        self.c_size = 0

        probe_cap = int(config.sim_end / config.detect_period) + 8
        self.p_time = np.zeros(probe_cap, dtype=np.float64)
        self.p_task = np.full(probe_cap, -1, dtype=np.int64)
        self.p_pool = np.zeros((probe_cap, k), dtype=np.int64)
        self.p_votes = np.zeros((probe_cap, k), dtype=np.uint64)
        self.p_arr = np.zeros((probe_cap, k), dtype=np.float64)
        self.p_outcome = np.zeros(probe_cap, dtype=np.int8)
        self.p_count = 0

        self.scratch = np.zeros(n, dtype=np.int64)
        self.pool_buf = np.zeros(max(k, n), dtype=np.int64)
        self.vote_buf = np.zeros(max(k, n), dtype=np.uint64)
        self.arr_buf = np.zeros(max(k, n), dtype=np.float64)
        self.free_buf = np.zeros(n, dtype=np.int64)
        self.order_buf = np.zeros(max(k, n), dtype=np.int64)

        self.done_cursor = 0
        self.admit_cursor = 0
        self.next_probe_idx = 1

        self.mitigation_dispatches: list = []

    def behavior_args(self):
        cfg = self.config
        return (
            self.classes, self.seen, self.ring_seen, cfg.shared_ring_memory,
            cfg.joint_collusion, self.t_act, cfg.p_collude, cfg.epsilon, self.salt,
        )

    def plain_stream(self, start_slot: int, end_slot: int) -> int:
        """Fill [start_slot, end_slot) with ordinary genuine traffic."""
        end_slot = min(end_slot, self.total_slots)
        if start_slot >= end_slot:
            return start_slot
        return int(
            kernels.run_plain_stream(
                self.rs, start_slot, end_slot, self.slot_dt, self.n, self.k,
                *self.behavior_args(),
                self.rtt_lo, self.rtt_hi,
                self.g_pool, self.g_votes, self.g_arr, self.g_dispatch,
                self.g_done, self.g_maj, self.g_maj_has, self.g_colluded,
                self.scratch, self.pool_buf, self.vote_buf, self.arr_buf,
            )
        )

    def slot_time(self, slot: int) -> float:
        return slot * self.slot_dt

    def slot_after(self, t: float) -> int:
        return int(math.ceil(t / self.slot_dt - 1e-12))


def _snapshot_evidence(world: World, det_task, det_worker, det_value, det_vmaj, det_vmaj_null) -> DetectionEvidence:
    """Read the triggering entry out of the table before it is wiped."""
    from .cvt import cvt_find

    row = int(cvt_find(world.c_task, world.c_size, det_task))
    recorded: dict[int, int] = {}
    if row >= 0:
        for j in range(world.n):
            if world.c_has[row, j]:
                recorded[j] = int(world.c_rec[row, j])
    minority = {j for j, v in recorded.items() if v == int(det_value)}
    minority.add(int(det_worker))
    majority_val = None if det_vmaj_null else int(det_vmaj)
    majority_workers = {j for j, v in recorded.items() if majority_val is not None and v == majority_val}
    return DetectionEvidence(
        task=int(det_task),
        majority=majority_val,
        minority_workers=frozenset(minority),
        majority_workers=frozenset(majority_workers),
        recorded=recorded,
    )


def run(config: ScenarioConfig, scheme: str = "serene", seed: int | None = None) -> RunTrace:
    """Simulate one seeded scenario under the given scheme."""
    from .mitigation import run_mitigation
    from .sne import run_sne

    started = _time.perf_counter()
    scheme = scheme.lower()
    if seed is None:
        seed = config.rng_seed
    world = World(config, scheme, seed)

    detections: list[DetectionEvent] = []
    reports: list[MitigationReport] = []
    sne_recluster_times: list[float] = []
    end_time = config.sim_end
    generated = world.total_slots

    if scheme in _SERENE_FAMILY:
        slot = 0
        while slot < world.total_slots:
            (
                status, slot, world.r2_count, world.c_size, world.next_probe_idx,
                world.done_cursor, world.admit_cursor, world.p_count,
                det_time, det_task, det_worker, det_value, det_vmaj, det_vmaj_null,
            ) = kernels.run_detection_phase(
                world.rs, slot, world.total_slots, world.slot_dt, world.n, world.k,
                *world.behavior_args(),
                world.rtt_lo, world.rtt_hi,
                world.g_pool, world.g_votes, world.g_arr, world.g_dispatch,
                world.g_done, world.g_maj, world.g_maj_has, world.g_colluded,
                world.r2_of, world.r2_pool, world.r2_votes, world.r2_arr,
                world.r2_idx, world.r2_count,
                world.cvt_cap, world.c_task, world.c_vals, world.c_nulls,
                world.c_rec, world.c_has, world.c_size,
                config.detect_period, world.next_probe_idx,
                world.done_cursor, world.admit_cursor,
                world.p_time, world.p_task, world.p_pool, world.p_votes,
                world.p_arr, world.p_outcome, world.p_count,
                world.scratch, world.pool_buf, world.vote_buf, world.arr_buf,
                world.free_buf, world.order_buf,
            )
            if status == 0:
                break

            evidence = _snapshot_evidence(world, det_task, det_worker, det_value, det_vmaj, det_vmaj_null)
            world.c_size = 0  # wipe the table; mitigation starts immediately
            epochs = _probe_epochs(world, det_time)
            detections.append(
                DetectionEvent(
                    sim_time=float(det_time),
                    task=int(det_task),
                    triggering_workers=evidence.minority_workers,
                    epoch_count=epochs,
                )
            )

            m_start = world.slot_after(float(det_time))
            slot = world.plain_stream(slot, m_start)
            report, slot = run_mitigation(world, slot, evidence, scheme)
            reports.append(report)
            if not report.complete:
                end_time = config.sim_end
                break
            end_time = float(report.final_time)
            if config.stop_after_mitigation:
                break
            # re-arm detection on fresh genuine tasks
            next_slot = world.slot_after(float(report.final_time))
            slot = world.plain_stream(slot, next_slot)
            world.done_cursor = slot
            world.admit_cursor = slot
            world.next_probe_idx = int(math.floor(world.slot_time(slot) / config.detect_period)) + 1
            end_time = config.sim_end
        generated = slot
        if slot >= world.total_slots:
            end_time = config.sim_end
    else:
        window = 8 if scheme == "sne8" else 12
        detection, report, generated, sne_recluster_times = run_sne(world, window)
        if detection is not None:
            detections.append(detection)
            end_time = detection.sim_time
        if report is not None:
            reports.append(report)

    trace = RunTrace(
        scheme=scheme,
        seed=int(seed),
        config=config,
        roster=world.classes.copy(),
        ground_truth_collusion=world.ground_truth,
        activation_time=None if math.isinf(world.t_act) else world.t_act,
        detections=detections,
        reports=reports,
        end_time=end_time,
        generated_tasks=int(generated),
        task_log=_trim_task_log(world, int(generated)),
        probe_log=_trim_probe_log(world),
        mitigation_dispatches=world.mitigation_dispatches,
        sne_recluster_times=sne_recluster_times,
        wall_seconds=_time.perf_counter() - started,
    )
    return trace


def _probe_epochs(world: World, det_time: float) -> int:
    """Probe dispatches between collusion activation and detection."""
    times = world.p_time[: world.p_count]
    if math.isinf(world.t_act):
        return int(world.p_count)
    return int(np.sum((times > world.t_act) & (times <= det_time + 1e-12)))


def _trim_task_log(world: World, generated: int) -> dict:
    sl = slice(0, generated)
    return {
        "pool": world.g_pool[sl].copy(),
        "votes": world.g_votes[sl].copy(),
        "arrivals": world.g_arr[sl].copy(),
        "dispatch": world.g_dispatch[sl].copy(),
        "done": world.g_done[sl].copy(),
        "majority": world.g_maj[sl].copy(),
        "majority_has": world.g_maj_has[sl].copy(),
        "colluded": world.g_colluded[sl].copy(),
        "redispatch_of": world.r2_of[: world.r2_count].copy(),
        "redispatch_pool": world.r2_pool[: world.r2_count].copy(),
        "redispatch_votes": world.r2_votes[: world.r2_count].copy(),
        "redispatch_arrivals": world.r2_arr[: world.r2_count].copy(),
    }


def _trim_probe_log(world: World) -> dict:
    sl = slice(0, world.p_count)
    return {
        "time": world.p_time[sl].copy(),
        "task": world.p_task[sl].copy(),
        "pool": world.p_pool[sl].copy(),
        "votes": world.p_votes[sl].copy(),
        "arrivals": world.p_arr[sl].copy(),
        "outcome": world.p_outcome[sl].copy(),
    }


def run_batch(configs, repetitions: int, base_seed: int, scheme: str = "serene"):
    """Yield traces for every (config, repetition) cell; seeds are base + index.

    ``configs`` is an iterable of ScenarioConfig; runs share nothing but the
    read-only configs, so callers may distribute them freely.
    """
    index = 0
    for config in configs:
        for _ in range(repetitions):
            yield run(config, scheme=scheme, seed=base_seed + index)
            index += 1
