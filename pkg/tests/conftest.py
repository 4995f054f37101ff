#!/usr/bin/env python3
# 测试共用夹具：两模态三维基准模型、随机小规模实例生成器

import json
from typing import Callable, Sequence, Tuple

import numpy as np
import pytest

from model_utils import MjlsModel, build_model
from riccati_solver import solve_finite_horizon

BENCHMARK_TRANSITION = [[0.45, 0.55], [0.4, 0.6]]

# (v̄¹, v̄², μ̄¹, μ̄²)
GOOD_CHANNELS = (0.88, 0.86, 0.89, 0.87)
FAIR_CHANNELS = (0.82, 0.81, 0.83, 0.85)
POOR_CHANNELS = (0.72, 0.76, 0.77, 0.67)
DECAY_CHANNELS = (0.81, 0.8, 0.81, 0.79)

BENCHMARK_X0 = np.array([0.1, 0.2, 0.3])

# 远高于基准算例 γ_c 的衰减水平，结构性测试在该 γ 下总是可行
BENCHMARK_GAMMA = 1e3


def benchmark_modes() -> list:
    B = [[1, 2], [1, 0], [0, 1]]
    C = [[0, 0, 0], [0, 0, 0], [1, 1, 1]]
    D1 = [[1], [1], [1]]
    return [
        {"A": [[1, 2, 1], [0, 1, 1], [1, 0, 2]], "B": B, "C": C, "D": [[1, 0], [0, 1], [0, 0]], "D1": D1},
        {"A": [[1, 0, 1], [0, 1, 0], [1, 0, 2]], "B": B, "C": C, "D": [[1, 1], [0, 1], [0, 0]], "D1": D1},
    ]


def channels_from_probabilities(probabilities: Sequence[float]) -> list:
    """(v̄¹, v̄², μ̄¹, μ̄²) → [(v̄¹, μ̄¹), (v̄², μ̄²)]"""
    v1, v2, mu1, mu2 = probabilities
    return [(v1, mu1), (v2, mu2)]


def make_benchmark(probabilities: Sequence[float] = GOOD_CHANNELS) -> MjlsModel:
    return build_model(benchmark_modes(), BENCHMARK_TRANSITION, channels_from_probabilities(probabilities))


def benchmark_scenario_dict(probabilities: Sequence[float] = GOOD_CHANNELS, **sections) -> dict:
    data = {
        "format_version": 1,
        "model": {
            "modes": benchmark_modes(),
            "transition": BENCHMARK_TRANSITION,
            "channels": [{"stay_good": v, "recover": mu} for v, mu in channels_from_probabilities(probabilities)],
        },
    }
    data.update(sections)
    return data


def random_tiny_model(rng: np.random.Generator, max_n: int = 2, max_m: int = 2, max_modes: int = 2) -> MjlsModel:
    """满足全部校验假设的随机小实例：C = [C0; 0]，D = [0; D0]，因此 CᵀD = 0"""
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    s = int(rng.integers(1, 3))
    num_modes = int(rng.integers(1, max_modes + 1))
    modes = []
    for _ in range(num_modes):
        A = rng.uniform(-1.2, 1.2, (n, n)) + 0.5 * np.eye(n)
        while abs(np.linalg.det(A)) < 1e-2:
            A = rng.uniform(-1.2, 1.2, (n, n)) + 0.5 * np.eye(n)
        C0 = rng.uniform(-1.0, 1.0, (n, n)) + np.eye(n)
        D0 = rng.uniform(-0.5, 0.5, (m, m)) + 1.5 * np.eye(m)
        modes.append({
            "A": A,
            "B": rng.uniform(-1.0, 1.0, (n, m)),
            "C": np.vstack([C0, np.zeros((m, n))]),
            "D": np.vstack([np.zeros((n, m)), D0]),
            "D1": rng.uniform(-0.5, 0.5, (n, s)),
        })
    transition = rng.uniform(0.1, 1.0, (num_modes, num_modes))
    transition /= transition.sum(axis=1, keepdims=True)
    channels = [tuple(rng.uniform(0.3, 1.0, 2)) for _ in range(m)]
    return build_model(modes, transition, channels)


def feasible_gamma(model: MjlsModel, horizon: int, start: float = 1.0) -> float:
    """从 start 起倍增，直到 N 步有限时域可行"""
    gamma = start
    while not solve_finite_horizon(model, gamma, horizon).feasible:
        gamma *= 2.0
    return gamma


@pytest.fixture
def benchmark() -> Callable[..., MjlsModel]:
    return make_benchmark


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def tiny_instances() -> Callable[[int, int], list]:
    """返回 (model, gamma) 列表的工厂，γ 在 horizon 步内可行"""

    def factory(count: int, horizon: int, seed: int = 7) -> list:
        generator = np.random.default_rng(seed)
        instances = []
        for _ in range(count):
            model = random_tiny_model(generator)
            instances.append((model, feasible_gamma(model, horizon)))
        return instances

    return factory


@pytest.fixture
def scalar_model() -> Callable[..., MjlsModel]:
    """n=m=s=1 的单模态模型，W(1) = c², R(1) = d²"""

    def factory(a: float = 1.0, b: float = 1.0, d1: float = 1.0, c: float = 1.0, d: float = 1.0,
                stay_good: float = 1.0, recover: float = 1.0, terminal: float = 0.0) -> MjlsModel:
        modes = [{"A": [[a]], "B": [[b]], "C": [[c], [0.0]], "D": [[0.0], [d]], "D1": [[d1]]}]
        return build_model(modes, [[1.0]], [(stay_good, recover)], [[terminal]])

    return factory


@pytest.fixture
def write_scenario(tmp_path) -> Callable[[dict, str], str]:
    def writer(data: dict, name: str = "scenario.json") -> str:
        path = tmp_path / name
        path.write_text(json.dumps(data, indent=2), encoding="utf-8")
        return str(path)

    return writer


@pytest.fixture
def quiet_config(tmp_path) -> str:
    """关闭日志文件的配置文件，避免测试在仓库内写 logs/"""
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"log_to_file": False, "log_level": "WARNING", "max_workers": 1}), encoding="utf-8")
    return str(path)


def finite_pair(model: MjlsModel, gamma: float, horizon: int) -> Tuple:
    return solve_finite_horizon(model, gamma, horizon), solve_finite_horizon(model, gamma, horizon + 1)
