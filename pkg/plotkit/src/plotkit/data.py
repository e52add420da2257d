"""Loading and shaping of serene-sim runs.csv files.

The CSV interface is versioned through its leading comment line; anything
else is rejected before plotting starts. INF detection delays and latencies
arrive as empty cells on runs flagged as undetected/incomplete and are
materialized as math.inf here.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

CSV_SCHEMA = "serene-runs-csv v1"

REQUIRED_COLUMNS = {
    "scheme", "n_workers", "colluding_fraction", "p_collude", "cvt_len",
    "obs_per_edge", "seed", "activation_s", "ground_truth_collusion",
    "detected", "false_positive", "detection_delay_s", "detection_epochs",
    "mitigation_f1", "mitigation_complete", "mitigation_latency_s",
}


class SchemaError(ValueError):
    """The input file does not carry the expected schema version."""


@dataclass
class Run:
    scheme: str
    colluding_fraction: float
    p_collude: float
    cvt_len: int
    obs_per_edge: int
    ground_truth_collusion: bool
    detected: bool
    false_positive: bool
    detection_delay_s: float | None
    detection_epochs: float | None
    mitigation_f1: float | None
    mitigation_latency_s: float | None

    @property
    def proper_detection(self) -> bool:
        return self.detected and not self.false_positive


def _flag(text: str) -> bool:
    return text == "true"


def _opt_float(text: str) -> float | None:
    return float(text) if text else None


def load_runs(path: str | Path) -> list[Run]:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline().strip()
        if not first.startswith("#") or CSV_SCHEMA not in first:
            raise SchemaError(
                f"{path}: expected a '# {CSV_SCHEMA}' header line, got {first!r}"
            )
        reader = csv.DictReader(fh)
        missing = REQUIRED_COLUMNS - set(reader.fieldnames or ())
        if missing:
            raise SchemaError(f"{path}: missing columns {sorted(missing)}")
        runs = []
        for rec in reader:
            truth = _flag(rec["ground_truth_collusion"])
            detected = _flag(rec["detected"])
            fp = _flag(rec["false_positive"])
            delay = _opt_float(rec["detection_delay_s"])
            if delay is None and truth and not (detected and not fp):
                delay = math.inf
            latency = _opt_float(rec["mitigation_latency_s"])
            if latency is None and truth and _flag_or_none(rec["mitigation_complete"]) is False:
                latency = math.inf
            runs.append(Run(
                scheme=rec["scheme"],
                colluding_fraction=float(rec["colluding_fraction"]),
                p_collude=float(rec["p_collude"]),
                cvt_len=int(rec["cvt_len"]),
                obs_per_edge=int(rec["obs_per_edge"]),
                ground_truth_collusion=truth,
                detected=detected,
                false_positive=fp,
                detection_delay_s=delay,
                detection_epochs=_opt_float(rec["detection_epochs"]),
                mitigation_f1=_opt_float(rec["mitigation_f1"]),
                mitigation_latency_s=latency,
            ))
    if not runs:
        raise ValueError(f"{path}: no runs to plot")
    return runs


def _flag_or_none(text: str):
    if not text:
        return None
    return text == "true"


def cdf_points(values):
    """Sorted finite values with cumulative fractions, plus the INF share.

    Returns (xs, ys, inf_fraction); ys account for the INF mass, so a curve
    with undetected runs plateaus below 1.
    """
    finite = sorted(v for v in values if v is not None and not math.isinf(v))
    total = len([v for v in values if v is not None])
    if total == 0:
        return [], [], 0.0
    xs = finite
    ys = [(i + 1) / total for i in range(len(finite))]
    inf_fraction = (total - len(finite)) / total
    return xs, ys, inf_fraction


def detection_f1(runs) -> float | None:
    tp = fp = fn = 0
    for run in runs:
        if run.detected and run.ground_truth_collusion and not run.false_positive:
            tp += 1
        elif run.detected and run.false_positive:
            fp += 1
            if run.ground_truth_collusion:
                fn += 1
        elif run.ground_truth_collusion:
            fn += 1
    if tp + fn == 0:
        return None
    return 2.0 * tp / (2.0 * tp + fp + fn)


def group_by(runs, key):
    groups: dict = {}
    for run in runs:
        groups.setdefault(key(run), []).append(run)
    return dict(sorted(groups.items(), key=lambda kv: str(kv[0])))
