"""Evaluation metrics computed from run traces.

Detection is scored per run as a binary outcome (collusion declared vs
ground truth). A declaration before the collusion ever activated counts as
a false positive, and the missed real collusion additionally counts as a
false negative. Mitigation is scored per worker with colluding as the
positive class; workers the scheme shunted into the naive-malicious set are
excluded from both sides of that comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import MitigationReport, RunTrace
from .model import WorkerClass

__all__ = [
    "MetricRow",
    "detection_outcome",
    "detection_delay",
    "detection_f1",
    "mitigation_f1",
    "mitigation_latency",
]

INF = math.inf


@dataclass
class MetricRow:
    """One run's worth of metric columns, as written to runs.csv."""

    scheme: str
    colluding_fraction: float
    p_collude: float
    seed: int
    detection_delay_s: float | None  # INF when never detected; None when no collusion
    detection_epochs: int | None
    detected: bool
    ground_truth_collusion: bool
    false_positive: bool
    mitigation_f1: float | None
    mitigation_complete: bool | None
    mitigation_latency_s: float | None
    cvt_len: int
    obs_per_edge: int
    activation_s: float | None
    n_workers: int

    @classmethod
    def from_trace(cls, trace: RunTrace) -> "MetricRow":
        cfg = trace.config
        outcome = detection_outcome(trace)
        delay = detection_delay(trace)
        det = trace.first_detection
        report = trace.first_report

        mit_f1 = None
        mit_complete = None
        mit_latency = None
        if trace.ground_truth_collusion:
            if report is not None and report.complete:
                mit_f1 = mitigation_f1(report, trace.roster)
                mit_complete = True
                mit_latency = mitigation_latency(trace)
            elif outcome == "tp":
                # detection fired but mitigation never finalized
                mit_f1 = 0.0
                mit_complete = False
                mit_latency = INF
            elif outcome == "fn":
                mit_f1 = 0.0
                mit_complete = False
                mit_latency = INF

        return cls(
            scheme=trace.scheme,
            colluding_fraction=cfg.colluding_fraction,
            p_collude=cfg.p_collude,
            seed=trace.seed,
            detection_delay_s=delay,
            detection_epochs=det.epoch_count if det is not None and outcome == "tp" else None,
            detected=bool(trace.detections),
            ground_truth_collusion=trace.ground_truth_collusion,
            false_positive=outcome in ("fp", "fp+fn"),
            mitigation_f1=mit_f1,
            mitigation_complete=mit_complete,
            mitigation_latency_s=mit_latency,
            cvt_len=cfg.resolved_cvt_len(),
            obs_per_edge=cfg.obs_per_edge,
            activation_s=trace.activation_time,
            n_workers=cfg.n_workers,
        )


def detection_outcome(trace: RunTrace) -> str:
    """'tp', 'fn', 'tn', 'fp', or 'fp+fn' for one run."""
    det = trace.first_detection
    truth = trace.ground_truth_collusion
    if det is None:
        return "fn" if truth else "tn"
    if not truth:
        return "fp"
    if trace.activation_time is not None and det.sim_time < trace.activation_time:
        return "fp+fn"  # declared before the ring ever activated
    return "tp"


def detection_delay(trace: RunTrace) -> float | None:
    """Seconds from collusion activation to detection.

    INF when collusion existed but was never (properly) detected; None for
    runs without collusion.
    """
    if not trace.ground_truth_collusion:
        return None
    outcome = detection_outcome(trace)
    if outcome != "tp":
        return INF
    return trace.first_detection.sim_time - trace.activation_time


def detection_f1(rows) -> float | None:
    """F1 over per-run outcomes with "collusion declared" as positive class."""
    tp = fp = fn = 0
    for row in rows:
        truth = row.ground_truth_collusion
        if row.detected and truth and not row.false_positive:
            tp += 1
        elif row.detected and row.false_positive:
            fp += 1
            if truth:
                fn += 1
        elif truth:
            fn += 1
    if tp + fn == 0:
        return None
    return 2.0 * tp / (2.0 * tp + fp + fn)


def mitigation_f1(report: MitigationReport, roster) -> float:
    """Per-worker F1 with colluding positive; scheme-flagged naive workers
    are dropped from both prediction and ground truth. Vacuously 1.0 when
    nothing remains to classify."""
    excluded = set(report.malicious)
    true_c = {
        i for i in range(len(roster))
        if roster[i] == int(WorkerClass.COLLUDING) and i not in excluded
    }
    pred_c = {i for i in report.colluding if i not in excluded}
    tp = len(pred_c & true_c)
    fp = len(pred_c - true_c)
    fn = len(true_c - pred_c)
    if tp + fp + fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def mitigation_latency(trace: RunTrace) -> float:
    """Seconds from collusion activation to mitigation completion; INF when
    mitigation never finalized."""
    report = trace.first_report
    if report is None or not report.complete or report.final_time is None:
        return INF
    if trace.activation_time is None:
        return INF
    return report.final_time - trace.activation_time
