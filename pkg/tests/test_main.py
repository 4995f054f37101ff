#!/usr/bin/env python3
# 命令行端到端测试：退出码、输出文件、run.json 可复现

import csv
import json
import os

import pytest

from conftest import POOR_CHANNELS, benchmark_scenario_dict
from main import main

QUICK_SEARCH = {"tol": 1e-2, "horizon_cap": 500}
SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "scenarios")
# 1.1 × γ_c，γ_c 为信道组 (0.88, 0.86, 0.89, 0.87) 的临界值
SHARED_GAMMA = 9.0626


def scalar_scenario(a=1.2, d1=0.5, stay_good=0.9, recover=0.8, **sections):
    data = {
        "format_version": 1,
        "model": {
            "modes": [{"A": [[a]], "B": [[1.0]], "C": [[1.0], [0.0]], "D": [[0.0], [1.0]], "D1": [[d1]]}],
            "transition": [[1.0]],
            "channels": [{"stay_good": stay_good, "recover": recover}],
        },
    }
    data.update(sections)
    return data


@pytest.fixture
def run_cli(quiet_config, tmp_path):
    """返回 (退出码, 输出目录)"""

    def runner(command, scenario_path, *extra, out="out"):
        out_dir = str(tmp_path / out)
        code = main([command, "--scenario", scenario_path, "--out", out_dir, "--config", quiet_config,
                     "--no-color", *extra])
        return code, out_dir

    return runner


def read_manifest(out_dir):
    with open(os.path.join(out_dir, "run.json"), encoding="utf-8") as f:
        return json.load(f)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def test_check_benchmark(run_cli, write_scenario):
    code, out = run_cli("check", write_scenario(benchmark_scenario_dict()))
    assert code == 0
    manifest = read_manifest(out)
    assert manifest["command"] == "check" and manifest["status"] == "ok"
    assert manifest["results"]["witness_path"] == [1, 1, 1]
    assert manifest["results"]["observable"] is True
    assert sum(manifest["results"]["stationary_outcome_distribution"]) == pytest.approx(1.0)


def test_check_unobservable_model_exits_two(run_cli, write_scenario):
    data = scalar_scenario()
    data["model"]["modes"] = [{"A": [[1.0, 1.0], [0.0, 1.0]], "B": [[0.0], [1.0]], "C": [[0.0, 1.0], [0.0, 0.0]],
                               "D": [[0.0], [1.0]], "D1": [[1.0], [0.0]]}]
    code, out = run_cli("check", write_scenario(data))
    assert code == 2
    assert read_manifest(out)["status"] == "not_observable"


def test_check_absorbing_channel_reports_invalid(run_cli, write_scenario):
    code, out = run_cli("check", write_scenario(scalar_scenario(stay_good=1.0, recover=0.0)))
    assert code == 1
    manifest = read_manifest(out)
    assert manifest["status"] == "invalid"
    assert manifest["results"]["stationary_success"] is None
    failed = [f["name"] for f in manifest["results"]["findings"] if not f["passed"]]
    assert failed == ["channel_probabilities_positive"]


def test_solve_finite_horizon(run_cli, write_scenario):
    path = write_scenario(benchmark_scenario_dict(game={"gamma": 1000.0, "horizon": 3, "x0": [0.1, 0.2, 0.3]}))
    code, out = run_cli("solve", path)
    assert code == 0
    value = read_csv(os.path.join(out, "value.csv"))
    assert value[0] == ["N", "J_N", "relative_change"] and len(value) == 4
    for i in (1, 2):
        assert os.path.exists(os.path.join(out, f"gains_{i}_hat.csv"))
        for j in range(4):
            assert len(read_csv(os.path.join(out, f"gains_{i}_{j}.csv"))) == 3
    results = read_manifest(out)["results"]
    assert results["game_value"] == pytest.approx(float(value[-1][1]))
    assert results["r0"] == 1


def test_solve_overrides_from_command_line(run_cli, write_scenario):
    path = write_scenario(benchmark_scenario_dict(game={"gamma": 0.01, "horizon": 3}))
    code, out = run_cli("solve", path, "--gamma", "1000", "--horizon", "2")
    assert code == 0
    assert len(read_csv(os.path.join(out, "value.csv"))) == 3
    assert read_manifest(out)["results"]["gamma"] == 1000.0


def test_solve_infeasible_exits_two(run_cli, write_scenario):
    code, out = run_cli("solve", write_scenario(scalar_scenario(a=1.0, d1=1.0, game={"gamma": 0.5, "horizon": 3})))
    assert code == 2
    manifest = read_manifest(out)
    assert manifest["status"] == "infeasible"
    assert manifest["results"]["first_infeasible"] is not None


def test_solve_infinite_horizon(run_cli, write_scenario):
    code, out = run_cli("solve", write_scenario(scalar_scenario(game={"gamma": 5.0, "infinite": True})))
    assert code == 0
    assert read_manifest(out)["status"] == "converged"
    assert read_csv(os.path.join(out, "gains_1_hat.csv"))[1][0] == "stationary"


def test_solve_poor_channels_at_shared_gamma_exits_two(run_cli, write_scenario):
    path = write_scenario(benchmark_scenario_dict(POOR_CHANNELS, game={"infinite": True, "x0": [0.1, 0.2, 0.3]}))
    code, out = run_cli("solve", path, "--gamma", str(SHARED_GAMMA))
    assert code == 2
    manifest = read_manifest(out)
    assert manifest["status"] in ("infeasible", "diverged")
    assert manifest["results"]["gamma"] == SHARED_GAMMA
    assert not os.path.exists(os.path.join(out, "gains_1_hat.csv"))


def test_gamma_reference_replaces_own_search(run_cli, write_scenario):
    # 几乎总丢包的信道，γ 借参考信道组的 γ_c 取得
    game = {"gamma_margin": 1.5, "infinite": True, "gamma_search": QUICK_SEARCH,
            "gamma_reference": [{"stay_good": 0.9, "recover": 0.8}]}
    scenario = scalar_scenario(stay_good=0.99, recover=0.001, game=game)
    code, out = run_cli("solve", write_scenario(scenario))
    manifest = read_manifest(out)
    assert manifest["status"] != "no_finite_gamma"
    assert manifest["results"]["gamma"] > 0.0
    assert code == (0 if manifest["status"] == "converged" else 2)


@pytest.mark.slow
def test_shipped_poor_benchmark_exits_two(run_cli):
    code, out = run_cli("solve", os.path.join(SCENARIO_DIR, "benchmark_poor.json"))
    assert code == 2
    manifest = read_manifest(out)
    assert manifest["status"] in ("infeasible", "diverged")
    assert os.path.exists(os.path.join(out, "value.csv"))


def test_solve_with_gamma_margin(run_cli, write_scenario):
    scenario = scalar_scenario(game={"gamma_margin": 1.5, "infinite": True, "gamma_search": QUICK_SEARCH})
    code, out = run_cli("solve", write_scenario(scenario))
    assert code == 0
    assert read_manifest(out)["results"]["gamma"] > 0.0


def test_gamma_c_without_finite_level(run_cli, write_scenario):
    scenario = scalar_scenario(a=10.0, d1=1.0, stay_good=0.99, recover=0.001, game={"gamma_search": QUICK_SEARCH})
    code, out = run_cli("gamma-c", write_scenario(scenario))
    assert code == 2
    rows = read_csv(os.path.join(out, "gamma_c.csv"))
    assert rows[1][:2] == ["", "false"]
    assert read_manifest(out)["status"] == "no_finite_gamma"


def test_sweep(run_cli, write_scenario):
    scenario = scalar_scenario(a=10.0, d1=1.0, stay_good=0.99, recover=0.5, game={"gamma_search": QUICK_SEARCH},
                               sweep={"channel": 1, "field": "recover", "grid": [0.001, 0.999]})
    code, out = run_cli("sweep", write_scenario(scenario))
    assert code == 0
    rows = read_csv(os.path.join(out, "sweep.csv"))
    assert [float(row[2]) for row in rows[1:]] == [0.001, 0.999]
    assert rows[1][3] == "" and rows[2][3] != ""
    assert read_manifest(out)["results"]["without_finite_gamma"] == 1


def test_simulate_is_reproducible_across_worker_counts(run_cli, write_scenario):
    scenario = scalar_scenario(game={"gamma": 5.0, "infinite": True},
                               simulation={"x0": [1.0], "steps": 20, "trials": 30, "seed": 4,
                                           "disturbance": {"kind": "damped_sinusoid"}})
    path = write_scenario(scenario)
    code, serial = run_cli("simulate", path, "--workers", "1", out="serial")
    assert code == 0
    code, parallel = run_cli("simulate", path, "--workers", "3", out="parallel")
    assert code == 0
    for name in ("run.json", "summary.csv", "trajectory.csv"):
        with open(os.path.join(serial, name), "rb") as a, open(os.path.join(parallel, name), "rb") as b:
            assert a.read() == b.read(), name
    assert len(read_csv(os.path.join(serial, "trajectory.csv"))) == 1 + 21
    results = read_manifest(serial)["results"]
    assert results["trials"] == 30 and results["seed"] == 4 and results["comparison_mode"] is False


def test_simulate_rejects_short_finite_horizon(run_cli, write_scenario):
    scenario = scalar_scenario(game={"gamma": 5.0, "horizon": 5}, simulation={"steps": 20, "trials": 2})
    code, _ = run_cli("simulate", write_scenario(scenario))
    assert code == 1


@pytest.mark.parametrize("scenario, extra", [
    ("{ broken", ()),
    (scalar_scenario(), ()),
    (scalar_scenario(game={"gamma": 5.0, "horizon": 2}), ("--horizon", "0")),
    (scalar_scenario(settings={"simulation": {"trials": 0}}), ()),
], ids=["syntax", "no_gamma", "horizon", "settings"])
def test_input_errors_exit_one(run_cli, tmp_path, scenario, extra):
    path = tmp_path / "input.json"
    path.write_text(scenario if isinstance(scenario, str) else json.dumps(scenario), encoding="utf-8")
    code, _ = run_cli("solve", str(path), *extra)
    assert code == 1


def test_sweep_requires_section(run_cli, write_scenario):
    code, _ = run_cli("sweep", write_scenario(scalar_scenario()))
    assert code == 1


def test_argument_errors_exit_one(quiet_config):
    with pytest.raises(SystemExit) as info:
        main(["optimize", "--scenario", "x.json", "--config", quiet_config, "--no-color"])
    assert info.value.code == 1
