#!/usr/bin/env python3
# 分析服务测试：弱可观测性、γ_c 二分搜索、信道参数扫描

import numpy as np
import pytest

from analysis_service import (GammaSearchSettings, gamma_critical, has_square_disturbance, numerical_rank,
                              observability_matrix, sweep, verify_witness, weak_observability)
from conftest import GOOD_CHANNELS, FAIR_CHANNELS, POOR_CHANNELS, BENCHMARK_X0, make_benchmark
from error_utils import DomainError
from model_utils import build_model
from riccati_solver import SolveStatus, solve_infinite_horizon, value_series

QUICK_SEARCH = GammaSearchSettings(tol=1e-2, horizon_cap=500)


def unstable_scalar(scalar_model, recover):
    return scalar_model(a=10.0, stay_good=0.99, recover=recover)


# ---------------------------------------------------------------- 弱可观测性

def test_benchmark_witness_path(benchmark):
    model = benchmark()
    report = weak_observability(model)
    assert report.observable
    assert report.witness_path == (0, 0, 0)
    assert report.rank == 3
    assert report.max_length_searched == 6
    stacked = observability_matrix(model, (0, 0, 0))
    assert np.allclose(stacked[2::3], [[1, 1, 1], [2, 3, 4], [6, 7, 13]])
    assert verify_witness(model, report.witness_path)


def test_witness_must_follow_positive_transitions():
    C1 = [[1.0, 0.0], [0.0, 0.0]]
    C2 = [[0.0, 1.0], [0.0, 0.0]]
    D = [[0.0], [1.0]]
    modes = [{"A": np.eye(2), "B": [[1.0], [0.0]], "C": C1, "D": D, "D1": [[1.0], [0.0]]},
             {"A": np.eye(2), "B": [[1.0], [0.0]], "C": C2, "D": D, "D1": [[1.0], [0.0]]}]
    model = build_model(modes, [[1.0, 0.0], [0.5, 0.5]], [(0.9, 0.9)])
    report = weak_observability(model)
    assert report.observable
    assert report.witness_path == (1, 0)
    assert not verify_witness(model, (0, 1))
    assert not verify_witness(model, ())
    assert not verify_witness(model, (0, 2))


def test_unobservable_model(benchmark):
    modes = [{"A": [[1.0, 1.0], [0.0, 1.0]], "B": [[0.0], [1.0]], "C": [[0.0, 1.0], [0.0, 0.0]],
              "D": [[0.0], [1.0]], "D1": [[1.0], [0.0]]}]
    model = build_model(modes, [[1.0]], [(0.9, 0.9)])
    report = weak_observability(model)
    assert not report.observable
    assert report.witness_path is None
    assert report.rank == 1
    assert report.max_length_searched == 2
    assert weak_observability(benchmark(), max_len=2).observable is False
    with pytest.raises(DomainError):
        weak_observability(model, max_len=0)


def test_numerical_rank():
    assert numerical_rank(np.zeros((3, 3))) == 0
    assert numerical_rank(np.zeros((0, 3))) == 0
    assert numerical_rank(np.array([[1.0, 1.0, 1.0], [2.0, 3.0, 4.0], [6.0, 7.0, 13.0]])) == 3
    assert numerical_rank(np.array([[1.0, 2.0], [2.0, 4.0 + 1e-14]])) == 1


# ---------------------------------------------------------------- γ_c 搜索

def test_square_disturbance_detection(benchmark, scalar_model):
    assert not has_square_disturbance(benchmark())
    assert has_square_disturbance(scalar_model())
    assert not has_square_disturbance(scalar_model(d1=0.0))


def test_no_finite_critical_level(scalar_model):
    result = gamma_critical(unstable_scalar(scalar_model, 0.001), QUICK_SEARCH)
    assert not result.found
    assert result.gamma_c is None
    assert "不存在" in result.message
    assert result.bracket_log[-1].gamma <= QUICK_SEARCH.hi_max
    assert all(not step.accepted for step in result.bracket_log)


def test_finite_critical_level(scalar_model):
    result = gamma_critical(unstable_scalar(scalar_model, 0.999), QUICK_SEARCH)
    assert result.found
    assert result.square_disturbance
    final = result.bracket_log[-1]
    assert final.hi == result.gamma_c
    assert final.hi - final.lo < QUICK_SEARCH.tol
    rejected = [step.gamma for step in result.bracket_log if not step.accepted]
    assert max(rejected) < result.gamma_c
    status = solve_infinite_horizon(unstable_scalar(scalar_model, 0.999), result.gamma_c,
                                    max_iter=QUICK_SEARCH.horizon_cap).status
    assert status in (SolveStatus.CONVERGED, SolveStatus.INDETERMINATE)


def test_search_bracket_validation(scalar_model):
    model = scalar_model(a=0.5)
    with pytest.raises(DomainError):
        gamma_critical(model, GammaSearchSettings(lo=2.0, hi=1.0))
    # lo 处已收敛：lo 不是有效下界
    with pytest.raises(DomainError):
        gamma_critical(model, GammaSearchSettings(lo=5.0, hi=10.0, horizon_cap=500))


def test_search_settings_from_config():
    settings = GammaSearchSettings.from_config({"lo": 0.5, "tol": 1e-4})
    assert settings.lo == 0.5 and settings.tol == 1e-4
    assert settings.hi == GammaSearchSettings().hi
    assert settings.horizon_cap == GammaSearchSettings().horizon_cap


# ---------------------------------------------------------------- 参数扫描

def test_sweep_records_failures_and_keeps_order(scalar_model):
    model = unstable_scalar(scalar_model, 0.5)
    table = sweep(model, 1, "recover", [0.001, 0.999], QUICK_SEARCH)
    assert table.channel == 1 and table.field_name == "recover"
    assert [p.value for p in table.points] == [0.001, 0.999]
    assert table.points[0].gamma_c is None
    assert table.points[0].message
    assert table.points[1].gamma_c is not None

    parallel = sweep(model, 1, "recover", [0.001, 0.999], QUICK_SEARCH, max_workers=2)
    assert parallel.gamma_column() == table.gamma_column()


def test_sweep_point_errors_do_not_abort(scalar_model):
    # lo 过大使每个点都报错，扫描仍返回完整表格
    model = scalar_model(a=0.5)
    table = sweep(model, 1, "stay_good", [0.5, 0.9], GammaSearchSettings(lo=5.0, hi=10.0, horizon_cap=200))
    assert table.gamma_column() == [None, None]
    assert all("lo" in p.message for p in table.points)


def test_sweep_grid_validation(scalar_model):
    with pytest.raises(DomainError):
        sweep(scalar_model(), 1, "recover", [0.0, 0.5])
    with pytest.raises(DomainError):
        sweep(scalar_model(), 1, "recover", [1.5])
    with pytest.raises(DomainError):
        sweep(scalar_model(), 2, "recover", [0.5])


# ---------------------------------------------------------------- 基准算例

@pytest.fixture(scope="module")
def blue_gamma():
    result = gamma_critical(make_benchmark(GOOD_CHANNELS))
    assert result.found
    return 1.1 * result.gamma_c


@pytest.mark.slow
def test_value_converges_for_good_channels(blue_gamma):
    blue = value_series(make_benchmark(GOOD_CHANNELS), blue_gamma, 500, BENCHMARK_X0, 0)
    red = value_series(make_benchmark(FAIR_CHANNELS), blue_gamma, 500, BENCHMARK_X0, 0)
    for series in (blue, red):
        assert series.first_infeasible is None and not series.diverged
        values = series.values
        assert all(b >= a - 1e-9 * max(1.0, abs(b)) for a, b in zip(values, values[1:]))
        assert series.relative_changes()[-1] < 1e-6
    assert red.values[-1] >= blue.values[-1] - 1e-9 * abs(blue.values[-1])


@pytest.mark.slow
def test_value_fails_for_poor_channels(blue_gamma):
    result = solve_infinite_horizon(make_benchmark(POOR_CHANNELS), blue_gamma)
    assert result.status in (SolveStatus.DIVERGED, SolveStatus.INFEASIBLE)


def _assert_nonincreasing(table, tol):
    found = [p.gamma_c for p in table.points if p.gamma_c is not None]
    assert found, "扫描没有任何有限 γ_c"
    assert table.points[-1].gamma_c is not None
    for previous, current in zip(found, found[1:]):
        assert current <= previous + tol


@pytest.mark.slow
def test_critical_level_decreases_with_stay_good():
    model = make_benchmark((0.6, 0.85, 0.82, 0.8))
    grid = [0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95]
    table = sweep(model, 1, "stay_good", grid, max_workers=4)
    _assert_nonincreasing(table, GammaSearchSettings().tol)


@pytest.mark.slow
def test_critical_level_decreases_with_recover():
    model = make_benchmark((0.85, 0.83, 0.5, 0.82))
    grid = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    table = sweep(model, 1, "recover", grid, max_workers=4)
    _assert_nonincreasing(table, GammaSearchSettings().tol)
