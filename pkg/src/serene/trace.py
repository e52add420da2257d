"""Run-trace serialization: line-delimited JSON records in event-time order.

The first line is a header carrying the schema version; every following
line is one record with a ``type`` field. Simulation events (task
dispatches, vote deliveries, probe rounds, detection, mitigation steps) are
ordered through the event queue, so consumers can stream the file and rely
on non-decreasing ``t``. Result values are 64-bit integers printed as
decimal; readers in double-only languages should treat them as opaque
strings.
"""

from __future__ import annotations

import json
from pathlib import Path

from .engine import Event, EventKind, EventQueue, RunTrace

SCHEMA_VERSION = 1

__all__ = ["SCHEMA_VERSION", "write_trace", "trace_events", "trace_digest"]


def trace_events(trace: RunTrace):
    """Yield the run's records as (time, dict) in event order."""
    queue = EventQueue()

    def push(t, kind, record):
        queue.push(Event(float(t), kind, (record,)))

    if trace.activation_time is not None:
        push(trace.activation_time, EventKind.COLLUSION_ACTIVATE,
             {"type": "collusion_activate", "t": trace.activation_time})

    log = trace.task_log
    n_tasks = len(log["dispatch"])
    for seq in range(n_tasks):
        push(log["dispatch"][seq], EventKind.GENERATE_TASK, {
            "type": "task_dispatch",
            "t": float(log["dispatch"][seq]),
            "task": seq,
            "pool": [int(w) for w in log["pool"][seq]],
            "votes": [int(v) for v in log["votes"][seq]],
            "majority": int(log["majority"][seq]) if log["majority_has"][seq] else None,
            "colluded": bool(log["colluded"][seq]),
        })
        for a, worker in enumerate(log["pool"][seq]):
            push(log["arrivals"][seq][a], EventKind.DELIVER_VOTE, {
                "type": "vote",
                "t": float(log["arrivals"][seq][a]),
                "task": seq,
                "worker": int(worker),
                "value": int(log["votes"][seq][a]),
            })
    for r in range(len(log["redispatch_of"])):
        seq = int(log["redispatch_of"][r])
        # stamped at the earliest vote arrival; the dispatch preceded it by
        # one round trip
        t0 = float(min(log["redispatch_arrivals"][r]))
        push(t0, EventKind.GENERATE_TASK, {
            "type": "task_redispatch",
            "t": t0,
            "task": seq,
            "pool": [int(w) for w in log["redispatch_pool"][r]],
            "votes": [int(v) for v in log["redispatch_votes"][r]],
        })

    probes = trace.probe_log
    for p in range(len(probes["time"])):
        push(probes["time"][p], EventKind.DETECT_TICK, {
            "type": "probe",
            "t": float(probes["time"][p]),
            "task": int(probes["task"][p]),
            "pool": [int(w) for w in probes["pool"][p]],
            "votes": [int(v) for v in probes["votes"][p]],
            "outcome": int(probes["outcome"][p]),
        })

    for det in trace.detections:
        push(det.sim_time, EventKind.DETECT_TICK, {
            "type": "detection",
            "t": det.sim_time,
            "task": det.task,
            "triggering_workers": sorted(det.triggering_workers),
            "epoch_count": det.epoch_count,
        })

    for t, seq, kind, pool, votes, arrivals in trace.mitigation_dispatches:
        push(t, EventKind.MITIGATION_STEP, {
            "type": "mitigation_dispatch",
            "t": t,
            "task": seq,
            "kind": kind,
            "pool": list(pool),
            "votes": [int(v) for v in votes],
        })

    for report in trace.reports:
        t = report.final_time if report.final_time is not None else trace.end_time
        push(t, EventKind.MITIGATION_STEP, {
            "type": "mitigation_report",
            "t": t,
            "variant": report.variant,
            "complete": report.complete,
            "inconclusive": report.inconclusive,
            "partition_method": report.partition_method,
            "case": report.case,
            "tr_pools": report.tr_pools,
            "tt_size": report.tt_size,
            "malicious": sorted(report.malicious),
            "honest": sorted(report.honest),
            "colluding": sorted(report.colluding),
            "graph_edges": [[i, j, round(w, 6)] for i, j, w in report.graph_edges],
            "scores": {str(k): v for k, v in sorted(report.scores.items())},
            "moves": [list(m) for m in report.moves],
        })

    push(trace.end_time, EventKind.SIM_END, {"type": "sim_end", "t": trace.end_time})

    while len(queue):
        event = queue.pop()
        yield event.time, event.payload[0]


def write_trace(trace: RunTrace, path: str | Path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        header = {
            "type": "header",
            "schema_version": SCHEMA_VERSION,
            "scheme": trace.scheme,
            "seed": trace.seed,
            "generated_tasks": trace.generated_tasks,
            "ground_truth_collusion": trace.ground_truth_collusion,
            "roster": [int(c) for c in trace.roster],
            "config": {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in vars(trace.config).items()},
        }
        fh.write(json.dumps(header) + "\n")
        for _, record in trace_events(trace):
            fh.write(json.dumps(record) + "\n")


def trace_digest(trace: RunTrace) -> str:
    """Stable content hash of the trace; equal runs hash equal."""
    import hashlib

    h = hashlib.sha256()
    h.update(json.dumps({
        "scheme": trace.scheme,
        "seed": trace.seed,
        "tasks": trace.generated_tasks,
        "end": round(trace.end_time, 9),
    }, sort_keys=True).encode())
    for _, record in trace_events(trace):
        h.update(json.dumps(record, sort_keys=True).encode())
    return h.hexdigest()
