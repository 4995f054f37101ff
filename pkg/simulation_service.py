#!/usr/bin/env python3
"""
闭环仿真服务模块 - 按种子复现的蒙特卡洛仿真，检验均方稳定性与 L2 增益界
"""

import concurrent.futures
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from channel_utils import STATIONARY, outcome_bits, stationary_success_vector
from constants import INPUT_POLICIES, SIM_SEED, SIM_STEPS, SIM_TRIALS
from error_utils import DomainError
from log_utils import get_logger, log_function_call
from model_utils import MjlsModel
from riccati_solver import GainSource, InfiniteHorizonResult, controller_gain
from rng_utils import TrialRNG, bernoulli, inverse_cdf


# ---------------------------------------------------------------- 扰动策略

class DisturbancePolicy:
    """扰动策略基类：按阶段、状态和最坏扰动增益给出 w_k"""

    name = "base"
    needs_solution = False

    def disturbance(self, k: int, x: np.ndarray, psi: np.ndarray, s: int) -> np.ndarray:
        raise NotImplementedError


class ZeroDisturbance(DisturbancePolicy):
    name = "zero"

    def disturbance(self, k: int, x: np.ndarray, psi: np.ndarray, s: int) -> np.ndarray:
        return np.zeros(s)


def damped_sinusoid(amplitude: float = 1.0, omega: float = 0.2 * math.pi,
                    decay: float = 0.5) -> Callable[[int], float]:
    """a·sin(ωk)·cos(ωk)·e^{−λk}"""

    def waveform(k: int) -> float:
        return amplitude * math.sin(omega * k) * math.cos(omega * k) * math.exp(-decay * k)

    return waveform


class WaveformDisturbance(DisturbancePolicy):
    """给定波形的扰动；表格长度之外取 0，标量值广播到所有分量

    Args:
        source: 采样表（形状 (K,) 或 (K, s)）或函数 k → 标量/向量
    """

    name = "waveform"

    def __init__(self, source: Union[Sequence, np.ndarray, Callable[[int], Union[float, np.ndarray]]]):
        if callable(source):
            self._function = source
            self._table = None
        else:
            table = np.asarray(source, dtype=float)
            if table.ndim not in (1, 2) or not np.all(np.isfinite(table)):
                raise DomainError("波形采样表必须是有限值的一维或二维数组")
            self._function = None
            self._table = table

    def value(self, k: int, s: int) -> np.ndarray:
        if self._table is not None:
            if k >= len(self._table):
                return np.zeros(s)
            raw = self._table[k]
        else:
            raw = self._function(k)
        value = np.broadcast_to(np.asarray(raw, dtype=float), (s,)).copy()
        if not np.all(np.isfinite(value)):
            raise DomainError(f"第 {k} 步波形值非有限")
        return value

    def disturbance(self, k: int, x: np.ndarray, psi: np.ndarray, s: int) -> np.ndarray:
        return self.value(k, s)


class WorstCaseDisturbance(DisturbancePolicy):
    """w_k = Ψ̃_k x_k，可叠加探测波形使 x0 = 0 时仍有非零激励"""

    name = "worst_case"
    needs_solution = True

    def __init__(self, probe: Optional[WaveformDisturbance] = None):
        self.probe = probe

    def disturbance(self, k: int, x: np.ndarray, psi: np.ndarray, s: int) -> np.ndarray:
        w = psi @ x
        if self.probe is not None:
            w = w + self.probe.value(k, s)
        return w


# ---------------------------------------------------------------- 单次仿真

@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """一次闭环仿真的完整记录；states 比其余序列多一个终点"""

    modes: np.ndarray
    outcomes: np.ndarray
    states: np.ndarray
    commands: np.ndarray
    applied: np.ndarray
    disturbances: np.ndarray
    outputs: np.ndarray
    seed: int
    trial: int
    input_policy: str

    @property
    def steps(self) -> int:
        return len(self.modes)

    def successes(self, m: int) -> np.ndarray:
        """(K, m) 的送达标记"""
        return outcome_bits(m)[self.outcomes]


def _check_policy(input_policy: str) -> str:
    if input_policy not in INPUT_POLICIES:
        raise DomainError(f"未知输入策略 {input_policy}，可选 {INPUT_POLICIES}")
    return input_policy


def simulate(model: MjlsModel, gains: GainSource, disturbance: DisturbancePolicy, x0: np.ndarray, r0: int,
             steps: int = SIM_STEPS, seed: int = SIM_SEED, trial: int = 0,
             input_policy: str = "zero") -> TrajectoryRecord:
    """按 (种子, 试验编号) 子流仿真一条闭环轨迹

    每步依次抽取 m 个信道均匀数和 1 个模态转移均匀数。初始信道状态取平稳分布，
    k ≥ 1 的控制按 (r_k, ξ_{k−1}) 取增益，k = 0 取带帽增益。

    Args:
        model: 问题实例
        gains: 有限/无限时域解
        disturbance: 扰动策略
        x0: 初始状态
        r0: 初始模态（0 起）
        steps: 仿真步数 K
        seed: 随机种子
        trial: 试验编号
        input_policy: "zero" 丢包时执行零输入；"hold" 保持上次送达值（对照模式）

    Returns:
        TrajectoryRecord: 完整记录
    """
    if steps < 1:
        raise DomainError(f"仿真步数必须 ≥ 1，实际为 {steps}")
    if not 0 <= r0 < model.num_modes:
        raise DomainError(f"初始模态 {r0} 超出范围")
    if isinstance(gains, InfiniteHorizonResult) and gains.solution is not None:
        gains = gains.solution
    input_policy = _check_policy(input_policy)
    rng = TrialRNG(seed, trial)
    n, m, s = model.n, model.m, model.s
    stationary = stationary_success_vector(model.bank)
    weights = 1 << np.arange(m)

    modes = np.empty(steps, dtype=np.int64)
    outcomes = np.empty(steps, dtype=np.int64)
    states = np.empty((steps + 1, n))
    commands = np.empty((steps, m))
    applied = np.empty((steps, m))
    disturbances = np.empty((steps, s))
    outputs = np.empty((steps, model.p))

    x = np.asarray(x0, dtype=float).reshape(n)
    mode = int(r0)
    previous: Optional[int] = None
    held = np.zeros(m)
    states[0] = x
    for k in range(steps):
        draws = rng.uniforms(m + 1)
        if previous is None:
            success_probs = stationary
        else:
            success_probs = np.where(outcome_bits(m)[previous], model.bank.stay_good, model.bank.recover)
        success = np.array([bernoulli(success_probs[h], draws[h]) for h in range(m)])
        outcome = int(weights @ success)

        gain, psi = controller_gain(gains, k, mode, STATIONARY if previous is None else previous)
        u = -gain @ x
        if input_policy == "hold":
            held = np.where(success, u, held)
            u_applied = held.copy()
        else:
            u_applied = np.where(success, u, 0.0)
        w = disturbance.disturbance(k, x, psi, s)
        z = model.C[mode] @ x + model.D[mode] @ u_applied
        x_next = model.A[mode] @ x + model.B[mode] @ u_applied + model.D1[mode] @ w

        modes[k], outcomes[k] = mode, outcome
        commands[k], applied[k], disturbances[k], outputs[k] = u, u_applied, w, z
        states[k + 1] = x_next

        x = x_next
        previous = outcome
        mode = inverse_cdf(model.transition[mode], draws[m])

    return TrajectoryRecord(modes, outcomes, states, commands, applied, disturbances, outputs,
                            seed=int(seed), trial=int(trial), input_policy=input_policy)


# ---------------------------------------------------------------- 蒙特卡洛

@dataclass(frozen=True, eq=False)
class SimulationSummary:
    """多次试验的统计量

    empirical_gain = Σ_k mean‖z_k‖² / Σ_k mean‖w_k‖²（分母为 0 时为空）；
    margin 为每次试验 Σ‖z‖² − γ²Σ‖w‖² 的均值与标准误。
    """

    trials: int
    steps: int
    seed: int
    gamma: float
    input_policy: str
    mean_square_state: np.ndarray
    mean_output_energy: np.ndarray
    mean_disturbance_energy: np.ndarray
    empirical_gain: Optional[float]
    gain_stderr: Optional[float]
    margin_mean: float
    margin_stderr: float
    channel_success_rate: np.ndarray

    @property
    def comparison_mode(self) -> bool:
        return self.input_policy != "zero"

    @property
    def l2_certificate_holds(self) -> bool:
        """均值裕度不超过 3 个标准误"""
        return self.margin_mean <= 3.0 * self.margin_stderr

    @property
    def terminal_ratio(self) -> float:
        """E‖x_K‖² / E‖x_0‖²"""
        initial = self.mean_square_state[0]
        return float(self.mean_square_state[-1] / initial) if initial > 0 else float("nan")


def _trial_statistics(record: TrajectoryRecord, m: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    return (np.sum(record.states ** 2, axis=1), np.sum(record.outputs ** 2, axis=1),
            np.sum(record.disturbances ** 2, axis=1), record.successes(m).mean(axis=0))


@log_function_call
def monte_carlo(model: MjlsModel, gains: GainSource, disturbance: DisturbancePolicy, x0: np.ndarray, r0: int,
                steps: int = SIM_STEPS, trials: int = SIM_TRIALS, seed: int = SIM_SEED,
                input_policy: str = "zero", max_workers: Optional[int] = None) -> SimulationSummary:
    """并行运行多次试验，按试验编号顺序合并，结果与并行度无关"""
    logger = get_logger()
    if trials < 1:
        raise DomainError(f"试验次数必须 ≥ 1，实际为 {trials}")
    if isinstance(gains, InfiniteHorizonResult):
        gains = controller_source(gains)
    gamma = float(gains.gamma)
    logger.info(f"蒙特卡洛仿真开始: 种子 {seed}, {trials} 次试验, {steps} 步, 扰动 {disturbance.name}")

    def run(trial: int):
        record = simulate(model, gains, disturbance, x0, r0, steps, seed, trial, input_policy)
        return _trial_statistics(record, model.m)

    if max_workers and max_workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
            statistics = list(executor.map(run, range(trials)))
    else:
        statistics = [run(trial) for trial in range(trials)]

    state_energy = np.stack([item[0] for item in statistics])
    output_energy = np.stack([item[1] for item in statistics])
    disturbance_energy = np.stack([item[2] for item in statistics])
    success_rate = np.stack([item[3] for item in statistics]).mean(axis=0)

    margins = output_energy.sum(axis=1) - gamma ** 2 * disturbance_energy.sum(axis=1)
    margin_stderr = float(np.std(margins, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    total_disturbance = float(disturbance_energy.sum(axis=1).mean())
    if total_disturbance > 0.0:
        empirical_gain = float(output_energy.sum(axis=1).mean() / total_disturbance)
        gain_stderr = margin_stderr / total_disturbance
    else:
        empirical_gain, gain_stderr = None, None

    summary = SimulationSummary(
        trials=int(trials), steps=int(steps), seed=int(seed), gamma=gamma, input_policy=input_policy,
        mean_square_state=state_energy.mean(axis=0),
        mean_output_energy=output_energy.mean(axis=0),
        mean_disturbance_energy=disturbance_energy.mean(axis=0),
        empirical_gain=empirical_gain, gain_stderr=gain_stderr,
        margin_mean=float(margins.mean()), margin_stderr=margin_stderr,
        channel_success_rate=success_rate,
    )
    logger.info(f"蒙特卡洛仿真完成: E‖x_K‖²/E‖x_0‖² = {summary.terminal_ratio:.3e}, "
                f"L2 证书 {'成立' if summary.l2_certificate_holds else '不成立'}")
    return summary


def controller_source(result: InfiniteHorizonResult):
    """无限时域结果必须收敛才能作为增益来源"""
    if result.solution is None:
        raise DomainError(f"无限时域结果为 {result.status.value}，不能用于仿真")
    return result.solution
