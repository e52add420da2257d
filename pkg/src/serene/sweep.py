"""Sweep orchestration: run grids of scenarios, emit runs.csv and summary.json.

The CSV starts with a ``# serene-runs-csv v1`` comment line so downstream
tools can check the schema. INF values are written as empty cells alongside
boolean columns; they are never encoded as magic numbers.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from pathlib import Path

import numpy as np

from .config import ScenarioConfig
from .engine import run
from .metrics import MetricRow, detection_f1

CSV_SCHEMA = "serene-runs-csv v1"
SUMMARY_SCHEMA = 1

CSV_COLUMNS = [
    "scheme", "n_workers", "colluding_fraction", "p_collude", "cvt_len",
    "obs_per_edge", "seed", "activation_s", "ground_truth_collusion",
    "detected", "false_positive", "detection_delay_s", "detection_epochs",
    "mitigation_f1", "mitigation_complete", "mitigation_latency_s",
]

DEFAULT_COLLUDING = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
DEFAULT_PCS = (0.1, 0.5, 0.9)

__all__ = [
    "CSV_SCHEMA",
    "SUMMARY_SCHEMA",
    "CSV_COLUMNS",
    "SweepPlan",
    "build_plan",
    "execute",
    "write_runs_csv",
    "read_runs_csv",
    "summarize",
]


@dataclasses.dataclass
class SweepPlan:
    """Expanded list of (scheme, config) cells plus repetition count."""

    cells: list[tuple[str, ScenarioConfig]]
    repetitions: int
    base_seed: int

    @property
    def total_runs(self) -> int:
        return len(self.cells) * self.repetitions


def build_plan(
    base: ScenarioConfig,
    schemes=("serene",),
    colluding=DEFAULT_COLLUDING,
    p_collude=DEFAULT_PCS,
    cvt_lens=(None,),
    obs_values=(None,),
    repetitions: int = 30,
    base_seed: int = 1,
    include_controls: bool = True,
) -> SweepPlan:
    """Cross the requested axes into a run plan.

    Control cells (no colluders) are added once per scheme so detection F1
    has a negative class.
    """
    cells: list[tuple[str, ScenarioConfig]] = []
    for scheme in schemes:
        for cf in colluding:
            for pc in p_collude:
                for cl in cvt_lens:
                    for e in obs_values:
                        overrides = {"colluding_fraction": cf, "p_collude": pc}
                        if cl is not None:
                            overrides["cvt_len"] = cl
                        if e is not None:
                            overrides["obs_per_edge"] = e
                        cells.append((scheme, base.with_overrides(overrides)))
        if include_controls:
            cells.append((scheme, base.with_overrides({"colluding_fraction": 0.0})))
    return SweepPlan(cells, repetitions, base_seed)


def execute(plan: SweepPlan, progress=None):
    """Run the plan; yields MetricRow per run. Seeds are base_seed + index."""
    index = 0
    for scheme, config in plan.cells:
        for _ in range(plan.repetitions):
            trace = run(config, scheme=scheme, seed=plan.base_seed + index)
            index += 1
            if progress is not None:
                progress(index, plan.total_runs, trace)
            yield MetricRow.from_trace(trace)


def _cell_value(value):
    if value is None:
        return ""
    if isinstance(value, float) and math.isinf(value):
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return value


def write_runs_csv(rows, path: str | Path) -> int:
    path = Path(path)
    count = 0
    with path.open("w", newline="") as fh:
        fh.write(f"# {CSV_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([
                row.scheme, row.n_workers, row.colluding_fraction, row.p_collude,
                row.cvt_len, row.obs_per_edge, row.seed,
                _cell_value(row.activation_s),
                _cell_value(row.ground_truth_collusion),
                _cell_value(row.detected),
                _cell_value(row.false_positive),
                _cell_value(row.detection_delay_s),
                _cell_value(row.detection_epochs),
                _cell_value(row.mitigation_f1),
                _cell_value(row.mitigation_complete),
                _cell_value(row.mitigation_latency_s),
            ])
            count += 1
    return count


def read_runs_csv(path: str | Path) -> list[MetricRow]:
    path = Path(path)
    rows: list[MetricRow] = []
    with path.open() as fh:
        first = fh.readline().strip()
        if not first.startswith("#") or CSV_SCHEMA not in first:
            raise ValueError(f"{path}: missing '# {CSV_SCHEMA}' schema line")
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for rec in reader:
            rows.append(MetricRow(
                scheme=rec["scheme"],
                colluding_fraction=float(rec["colluding_fraction"]),
                p_collude=float(rec["p_collude"]),
                seed=int(rec["seed"]),
                detection_delay_s=_parse_optional_float(rec["detection_delay_s"], inf_if_detected=rec),
                detection_epochs=int(rec["detection_epochs"]) if rec["detection_epochs"] else None,
                detected=rec["detected"] == "true",
                ground_truth_collusion=rec["ground_truth_collusion"] == "true",
                false_positive=rec["false_positive"] == "true",
                mitigation_f1=float(rec["mitigation_f1"]) if rec["mitigation_f1"] else None,
                mitigation_complete=(rec["mitigation_complete"] == "true") if rec["mitigation_complete"] else None,
                mitigation_latency_s=float(rec["mitigation_latency_s"]) if rec["mitigation_latency_s"] else None,
                cvt_len=int(rec["cvt_len"]),
                obs_per_edge=int(rec["obs_per_edge"]),
                activation_s=float(rec["activation_s"]) if rec["activation_s"] else None,
                n_workers=int(rec["n_workers"]),
            ))
    return rows


def _parse_optional_float(text: str, inf_if_detected=None):
    if text:
        return float(text)
    if inf_if_detected is not None:
        truth = inf_if_detected.get("ground_truth_collusion") == "true"
        detected = inf_if_detected.get("detected") == "true"
        fp = inf_if_detected.get("false_positive") == "true"
        if truth and (not detected or fp):
            return math.inf
    return None


def _quantiles(values, qs=(0.1, 0.25, 0.5, 0.75, 0.9)):
    finite = sorted(v for v in values if v is not None and not math.isinf(v))
    if not finite:
        return {}
    arr = np.array(finite)
    return {f"q{int(q * 100)}": float(np.quantile(arr, q)) for q in qs}


def summarize(rows: list[MetricRow]) -> dict:
    """Aggregate rows per (scheme, |C|, P_c, L, e) cell.

    Detection F1 per cell pools that cell's collusion rows with the scheme's
    no-collusion control rows as the negative class.
    """
    controls: dict[str, list[MetricRow]] = {}
    cells: dict[tuple, list[MetricRow]] = {}
    for row in rows:
        if not row.ground_truth_collusion:
            controls.setdefault(row.scheme, []).append(row)
        else:
            key = (row.scheme, row.colluding_fraction, row.p_collude, row.cvt_len, row.obs_per_edge)
            cells.setdefault(key, []).append(row)

    out_cells = []
    for key in sorted(cells):
        scheme, cf, pc, cvt_len, e = key
        group = cells[key]
        neg = controls.get(scheme, [])
        delays = [r.detection_delay_s for r in group if r.detection_delay_s is not None]
        inf_count = sum(1 for d in delays if math.isinf(d))
        f1s = [r.mitigation_f1 for r in group if r.mitigation_f1 is not None]
        lat = [r.mitigation_latency_s for r in group if r.mitigation_latency_s is not None]
        detected_ok = sum(1 for r in group if r.detected and not r.false_positive)
        out_cells.append({
            "scheme": scheme,
            "colluding_fraction": cf,
            "p_collude": pc,
            "cvt_len": cvt_len,
            "obs_per_edge": e,
            "runs": len(group),
            "detection": {
                "f1": detection_f1(group + neg),
                "success_rate": detected_ok / len(group) if group else None,
                "undetected": inf_count,
                "delay": _quantiles(delays),
            },
            "mitigation": {
                "f1_mean": float(np.mean(f1s)) if f1s else None,
                "f1": _quantiles(f1s),
                "incomplete": sum(1 for r in group if r.mitigation_complete is False),
                "latency": _quantiles(lat),
            },
        })

    control_summary = {
        scheme: {
            "runs": len(group),
            "false_positives": sum(1 for r in group if r.detected),
        }
        for scheme, group in sorted(controls.items())
    }
    return {
        "schema_version": SUMMARY_SCHEMA,
        "total_runs": len(rows),
        "cells": out_cells,
        "controls": control_summary,
    }
