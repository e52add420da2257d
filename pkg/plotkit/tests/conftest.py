import csv
import math
import random
from pathlib import Path

import pytest

HEADER = "# serene-runs-csv v1"
COLUMNS = [
    "scheme", "n_workers", "colluding_fraction", "p_collude", "cvt_len",
    "obs_per_edge", "seed", "activation_s", "ground_truth_collusion",
    "detected", "false_positive", "detection_delay_s", "detection_epochs",
    "mitigation_f1", "mitigation_complete", "mitigation_latency_s",
]


def _flag(value):
    return "true" if value else "false"


def synth_rows(seed=5):
    """Plausible sweep rows covering every axis a figure family needs,
    including undetected runs (INF delays) and no-collusion controls."""
    rnd = random.Random(seed)
    rows = []
    run_seed = 0
    for scheme in ("serene", "sne12", "sne8"):
        for cf in (0.1, 0.5, 0.9):
            for pc in (0.1, 0.5, 0.9):
                for cvt_len in (2, 5, 14):
                    for obs in (5, 12, 20):
                        run_seed += 1
                        detected = rnd.random() > (0.4 if scheme == "sne8" else 0.05)
                        delay = round(rnd.uniform(0.05, 8.0), 4) if detected else ""
                        f1 = round(max(0.0, min(1.0, rnd.gauss(0.8, 0.2))), 4) if detected else 0.0
                        rows.append({
                            "scheme": scheme, "n_workers": 20,
                            "colluding_fraction": cf, "p_collude": pc,
                            "cvt_len": cvt_len, "obs_per_edge": obs,
                            "seed": run_seed,
                            "activation_s": round(rnd.uniform(3, 90), 3),
                            "ground_truth_collusion": _flag(True),
                            "detected": _flag(detected),
                            "false_positive": _flag(False),
                            "detection_delay_s": delay,
                            "detection_epochs": rnd.randint(1, 40) if detected else "",
                            "mitigation_f1": f1,
                            "mitigation_complete": _flag(detected),
                            "mitigation_latency_s": round(rnd.uniform(1, 5), 4) if detected else "",
                        })
        for _ in range(6):  # control rows
            run_seed += 1
            rows.append({
                "scheme": scheme, "n_workers": 20, "colluding_fraction": 0.0,
                "p_collude": 0.5, "cvt_len": 5, "obs_per_edge": 12,
                "seed": run_seed, "activation_s": "",
                "ground_truth_collusion": _flag(False), "detected": _flag(False),
                "false_positive": _flag(False), "detection_delay_s": "",
                "detection_epochs": "", "mitigation_f1": "",
                "mitigation_complete": "", "mitigation_latency_s": "",
            })
    return rows


def write_csv(path: Path, rows):
    with path.open("w", newline="") as fh:
        fh.write(HEADER + "\n")
        writer = csv.DictWriter(fh, fieldnames=COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


@pytest.fixture(scope="session")
def sweep_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("sweep") / "runs.csv"
    write_csv(path, synth_rows())
    return path
