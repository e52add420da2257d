import math

import pytest

from plotkit.data import SchemaError, cdf_points, detection_f1, load_runs

from conftest import COLUMNS, HEADER, synth_rows, write_csv


def test_load_runs_parses_the_fixture(sweep_csv):
    runs = load_runs(sweep_csv)
    assert len(runs) > 100
    assert {r.scheme for r in runs} == {"serene", "sne12", "sne8"}


def test_undetected_runs_become_inf_delays(sweep_csv):
    runs = load_runs(sweep_csv)
    undetected = [r for r in runs if r.ground_truth_collusion and not r.detected]
    assert undetected
    assert all(math.isinf(r.detection_delay_s) for r in undetected)


def test_controls_have_no_delay(sweep_csv):
    runs = load_runs(sweep_csv)
    controls = [r for r in runs if not r.ground_truth_collusion]
    assert controls
    assert all(r.detection_delay_s is None for r in controls)


def test_missing_header_rejected(tmp_path):
    bad = tmp_path / "runs.csv"
    bad.write_text(",".join(COLUMNS) + "\n")
    with pytest.raises(SchemaError):
        load_runs(bad)


def test_wrong_version_rejected(tmp_path):
    bad = tmp_path / "runs.csv"
    bad.write_text("# serene-runs-csv v999\n" + ",".join(COLUMNS) + "\n")
    with pytest.raises(SchemaError):
        load_runs(bad)


def test_missing_column_rejected(tmp_path):
    bad = tmp_path / "runs.csv"
    bad.write_text(HEADER + "\nscheme,seed\nserene,1\n")
    with pytest.raises(SchemaError):
        load_runs(bad)


def test_empty_csv_rejected(tmp_path):
    empty = tmp_path / "runs.csv"
    empty.write_text(HEADER + "\n" + ",".join(COLUMNS) + "\n")
    with pytest.raises(ValueError):
        load_runs(empty)


def test_cdf_points_account_for_inf_mass():
    xs, ys, inf_fraction = cdf_points([1.0, 2.0, math.inf, math.inf])
    assert xs == [1.0, 2.0]
    assert ys == [0.25, 0.5]
    assert inf_fraction == 0.5


def test_detection_f1_formula():
    class R:
        def __init__(self, detected, truth, fp=False):
            self.detected = detected
            self.ground_truth_collusion = truth
            self.false_positive = fp

    rows = [R(True, True)] * 98 + [R(False, True)] * 2
    assert detection_f1(rows) == pytest.approx(2 * 98 / (2 * 98 + 2))
