#!/usr/bin/env python3
# CSV/run.json 导出测试

import csv
import json
import os

import numpy as np

from analysis_service import BracketStep, GammaSearchResult, SweepPoint, SweepTable
from conftest import BENCHMARK_GAMMA, BENCHMARK_X0
from result_utils import ResultExporter, format_number, matrix_headers
from riccati_solver import solve_finite_horizon, solve_infinite_horizon, value_series
from simulation_service import WaveformDisturbance, damped_sinusoid, simulate


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def test_format_number():
    assert format_number(None) == ""
    assert format_number(True) == "true"
    assert format_number(np.bool_(False)) == "false"
    assert format_number(np.int64(7)) == "7"
    assert format_number(0.1) == "0.10000000000000001"
    assert float(format_number(np.float64(1.0) / 3.0)) == 1.0 / 3.0
    assert format_number("stationary") == "stationary"


def test_matrix_headers_are_row_major_and_one_based():
    assert matrix_headers("Gamma", (2, 3)) == ["Gamma_1_1", "Gamma_1_2", "Gamma_1_3",
                                               "Gamma_2_1", "Gamma_2_2", "Gamma_2_3"]


def test_ensure_output_dir_and_write_failure(tmp_path):
    nested = str(tmp_path / "a" / "b")
    assert ResultExporter.ensure_output_dir(nested) == (True, nested)
    success, message = ResultExporter.write_csv(nested, ["x"], [[1]])
    assert not success
    assert nested in message


def test_value_series_csv(scalar_model, tmp_path):
    series = value_series(scalar_model(), 10.0, 4, np.ones(1), 0)
    assert ResultExporter.export_value_series(series, str(tmp_path))[0]
    rows = read_csv(tmp_path / "value.csv")
    assert rows[0] == ["N", "J_N", "relative_change"]
    assert [row[0] for row in rows[1:]] == ["1", "2", "3", "4"]
    assert rows[1][2] == ""
    assert float(rows[4][1]) == series.values[-1]


def test_finite_gain_files(benchmark, tmp_path):
    solution = solve_finite_horizon(benchmark(), BENCHMARK_GAMMA, 3)
    success, message = ResultExporter.export_finite_gains(solution, str(tmp_path))
    assert success, message
    files = sorted(os.listdir(tmp_path))
    assert len(files) == 2 * (1 + 4)
    assert "gains_2_hat.csv" in files and "gains_1_3.csv" in files

    rows = read_csv(tmp_path / "gains_1_2.csv")
    assert len(rows[0]) == 1 + 2 * 3 + 1 * 3 + 3 * 3
    assert rows[0][:2] == ["k", "Gamma_1_1"]
    assert [row[0] for row in rows[1:]] == ["1", "2"]
    gain = np.array([float(v) for v in rows[2][1:7]]).reshape(2, 3)
    assert np.array_equal(gain, solution.stages[2].gamma_gain[0, 2])

    hat = read_csv(tmp_path / "gains_2_hat.csv")
    assert len(hat) == 2 and hat[1][0] == "0"
    xi = np.array([float(v) for v in hat[1][10:]]).reshape(3, 3)
    assert np.array_equal(xi, solution.stages[0].xi[1, 0])


def test_infeasible_solution_exports_nothing(scalar_model, tmp_path):
    solution = solve_finite_horizon(scalar_model(), 0.5, 3)
    success, _ = ResultExporter.export_finite_gains(solution, str(tmp_path))
    assert not success
    assert os.listdir(tmp_path) == []


def test_stationary_gain_files(scalar_model, tmp_path):
    result = solve_infinite_horizon(scalar_model(a=1.2, d1=0.5, stay_good=0.9, recover=0.8), 5.0)
    assert ResultExporter.export_stationary_gains(result.solution, str(tmp_path))[0]
    assert sorted(os.listdir(tmp_path)) == ["gains_1_0.csv", "gains_1_1.csv", "gains_1_hat.csv"]
    rows = read_csv(tmp_path / "gains_1_1.csv")
    assert rows[0] == ["k", "Gamma_1_1", "Psi_1_1", "Xi_1_1"]
    assert rows[1][0] == "stationary"
    assert float(rows[1][1]) == result.solution.gamma_bar[0, 1][0, 0]


def test_gamma_search_files(tmp_path):
    result = GammaSearchResult(
        gamma_c=2.5, found=True, square_disturbance=False, message="",
        bracket_log=(BracketStep(1.0, "diverged", False, 1.0, 4.0), BracketStep(4.0, "converged", True, 1.0, 4.0),
                     BracketStep(2.5, "converged", True, 1.0, 2.5)))
    assert ResultExporter.export_gamma_search(result, str(tmp_path))[0]
    summary = read_csv(tmp_path / "gamma_c.csv")
    assert summary == [["gamma_c", "found", "square_disturbance", "evaluations", "message"],
                       ["2.5", "true", "false", "3", ""]]
    bracket = read_csv(tmp_path / "gamma_c_bracket.csv")
    assert bracket[0] == ["evaluation", "gamma", "status", "accepted", "lo", "hi"]
    assert bracket[1] == ["1", "1", "diverged", "false", "1", "4"]


def test_sweep_csv_leaves_missing_gamma_empty(tmp_path):
    table = SweepTable(1, "recover", (SweepPoint(0.5, None, "不存在有限的 γ_c"), SweepPoint(0.9, 3.25)))
    assert ResultExporter.export_sweep(table, str(tmp_path))[0]
    rows = read_csv(tmp_path / "sweep.csv")
    assert rows[0] == ["channel", "field", "value", "gamma_c", "message"]
    assert rows[1][:4] == ["1", "recover", "0.5", ""]
    assert rows[2] == ["1", "recover", "0.90000000000000002", "3.25", ""]


def test_trajectory_csv(benchmark, tmp_path):
    model = benchmark()
    solution = solve_finite_horizon(model, BENCHMARK_GAMMA, 10)
    record = simulate(model, solution, WaveformDisturbance(damped_sinusoid()), BENCHMARK_X0, 0, steps=10, seed=2)
    assert ResultExporter.export_trajectory(record, str(tmp_path))[0]
    rows = read_csv(tmp_path / "trajectory.csv")
    assert rows[0][:6] == ["k", "mode", "outcome", "x_1", "x_2", "x_3"]
    assert len(rows[0]) == 3 + 3 + 2 + 2 + 1 + 3
    assert len(rows) == 1 + 11
    assert rows[1][1] == "1"
    assert float(rows[-1][3]) == record.states[-1][0]
    assert rows[-1][1] == "" and rows[-1][-1] == ""


def test_manifest_is_sorted_and_stable(tmp_path):
    manifest = {"status": "ok", "command": "check", "results": {"b": 1, "a": [1.5, None]}}
    first, second = tmp_path / "first", tmp_path / "second"
    for directory in (first, second):
        directory.mkdir()
        assert ResultExporter.export_manifest(manifest, str(directory))[0]
    text = (first / "run.json").read_bytes()
    assert text == (second / "run.json").read_bytes()
    assert text.endswith(b"\n")
    assert list(json.loads(text)) == ["command", "results", "status"]
