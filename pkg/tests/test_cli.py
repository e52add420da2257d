import json
import math
from pathlib import Path

import pytest

from serene.cli import main
from serene.sweep import read_runs_csv, summarize

FAST_FLAGS = ["--rate", "400", "--sim-end", "3", "--start-window", "0.5,1.0"]


def test_simulate_prints_a_metric_row(capsys):
    assert main(["simulate", *FAST_FLAGS, "--seed", "7"]) == 0
    row = json.loads(capsys.readouterr().out)
    assert row["scheme"] == "serene"
    assert row["detected"] is True
    assert row["mitigation_f1"] is not None


def test_simulate_writes_a_trace(tmp_path, capsys):
    out = tmp_path / "trace.jsonl"
    assert main(["simulate", *FAST_FLAGS, "--seed", "7", "--trace", str(out)]) == 0
    lines = out.read_text().splitlines()
    header = json.loads(lines[0])
    assert header["type"] == "header" and header["schema_version"] == 1
    times = [json.loads(line)["t"] for line in lines[1:]]
    assert times == sorted(times)


def test_usage_error_exits_one():
    assert main(["simulate", "--pc", "1.5"]) == 1


def test_unknown_scheme_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--scheme", "bogus"])
    assert exc.value.code == 1


def test_io_error_exits_two(tmp_path):
    target = tmp_path / "file"
    target.write_text("")
    # using a file as the output directory cannot work
    assert main(["sweep", "--out", str(target / "sub"), "--reps", "1", "--quiet"]) == 2


def test_sweep_writes_csv_and_summary(tmp_path, capsys):
    out = tmp_path / "results"
    rc = main([
        "sweep", *FAST_FLAGS, "--out", str(out), "--reps", "2",
        "--colluding-grid", "0.5", "--pc-grid", "0.5", "--schemes", "serene",
        "--base-seed", "10", "--quiet",
    ])
    assert rc == 0
    rows = read_runs_csv(out / "runs.csv")
    assert len(rows) == 2 + 2  # one cell plus the control cell, 2 reps each
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == 1
    assert summary["total_runs"] == 4
    cell = summary["cells"][0]
    assert cell["scheme"] == "serene"
    assert cell["detection"]["f1"] is not None


def test_csv_round_trip_preserves_values(tmp_path):
    out = tmp_path / "results"
    main([
        "sweep", *FAST_FLAGS, "--out", str(out), "--reps", "2",
        "--colluding-grid", "0.5", "--pc-grid", "0.9", "--no-controls",
        "--schemes", "serene", "--base-seed", "3", "--quiet",
    ])
    rows = read_runs_csv(out / "runs.csv")
    assert all(row.ground_truth_collusion for row in rows)
    detected = [row for row in rows if row.detected]
    assert all(isinstance(row.detection_delay_s, float) for row in detected)
    undetected = [row for row in rows if not row.detected]
    assert all(math.isinf(row.detection_delay_s) for row in undetected)


def test_report_aggregates_existing_csv(tmp_path, capsys):
    out = tmp_path / "results"
    main([
        "sweep", *FAST_FLAGS, "--out", str(out), "--reps", "2",
        "--colluding-grid", "0.5", "--pc-grid", "0.5", "--schemes", "serene",
        "--base-seed", "10", "--quiet",
    ])
    capsys.readouterr()
    assert main(["report", str(out / "runs.csv")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["total_runs"] == 4


def test_report_rejects_wrong_schema(tmp_path):
    bad = tmp_path / "runs.csv"
    bad.write_text("a,b\n1,2\n")
    assert main(["report", str(bad)]) == 2


def test_summarize_matches_confusion_recount(tmp_path):
    out = tmp_path / "results"
    main([
        "sweep", *FAST_FLAGS, "--out", str(out), "--reps", "3",
        "--colluding-grid", "0.5", "--pc-grid", "0.9", "--schemes", "serene",
        "--base-seed", "20", "--quiet",
    ])
    rows = read_runs_csv(out / "runs.csv")
    summary = summarize(rows)
    cell = summary["cells"][0]
    tp = sum(1 for r in rows if r.ground_truth_collusion and r.detected and not r.false_positive)
    fn = sum(1 for r in rows if r.ground_truth_collusion and not (r.detected and not r.false_positive))
    fp = sum(1 for r in rows if r.detected and r.false_positive)
    expected = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    assert cell["detection"]["f1"] == pytest.approx(expected)


def test_l_sweep_accepts_fractions(tmp_path):
    out = tmp_path / "results"
    rc = main([
        "sweep", *FAST_FLAGS, "--out", str(out), "--reps", "1",
        "--colluding-grid", "0.5", "--pc-grid", "0.5", "--no-controls",
        "--l-sweep", "0.1,0.25,0.7", "--schemes", "serene",
        "--base-seed", "4", "--quiet",
    ])
    assert rc == 0
    rows = read_runs_csv(out / "runs.csv")
    assert sorted({r.cvt_len for r in rows}) == [2, 5, 14]  # fractions of N=20
