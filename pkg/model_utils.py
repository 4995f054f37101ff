#!/usr/bin/env python3
# 问题实例模块 - 跳变线性系统、模态马尔可夫链、Gilbert-Elliott 信道组及其校验

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.csgraph import connected_components

from constants import EXACT_ZERO_TOL, PD_THRESHOLD, CHANNEL_FIELDS
from error_utils import DimensionError, DomainError
from matrix_utils import is_positive_definite, is_positive_semidefinite, symmetrize


def _as_matrix(value, name: str) -> np.ndarray:
    """转换为只读二维浮点数组"""
    array = np.array(value, dtype=float)
    if array.ndim != 2:
        raise DimensionError(f"{name} 必须是二维矩阵，实际维数为 {array.ndim}")
    if not np.all(np.isfinite(array)):
        raise DomainError(f"{name} 含有非有限元素")
    array.setflags(write=False)
    return array


def _check_probability(value: float, name: str) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0.0 or value > 1.0:
        raise DomainError(f"{name}={value} 不在 [0, 1] 内")
    return value


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """时齐模态马尔可夫链 r_k，transition[i, d] = Pr(r_{k+1}=d | r_k=i)"""

    transition: np.ndarray

    def __post_init__(self) -> None:
        matrix = _as_matrix(self.transition, "转移矩阵")
        if matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
            raise DimensionError(f"转移矩阵必须是非空方阵，实际形状 {matrix.shape}")
        if np.any(matrix < 0.0) or np.any(matrix > 1.0):
            raise DomainError("转移概率必须位于 [0, 1]")
        object.__setattr__(self, "transition", matrix)

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    def row_sum_error(self) -> float:
        return float(np.max(np.abs(self.transition.sum(axis=1) - 1.0)))

    def is_row_stochastic(self, tol: float = EXACT_ZERO_TOL) -> bool:
        return self.row_sum_error() <= tol

    def is_irreducible(self) -> bool:
        """正元素有向图强连通"""
        count, _ = connected_components(self.transition > 0.0, directed=True, connection="strong")
        return count == 1

    def period(self) -> int:
        """所有状态、长度不超过 𝓜 的回路长度的最大公约数（0 表示没有回路）"""
        adjacency = (self.transition > 0.0).astype(np.int64)
        reach = np.eye(self.num_states, dtype=np.int64)
        lengths = []
        for k in range(1, self.num_states + 1):
            reach = np.minimum(reach @ adjacency, 1)
            if np.any(np.diag(reach) > 0):
                lengths.append(k)
        return reduce(math.gcd, lengths, 0)

    def is_aperiodic(self) -> bool:
        return self.period() == 1


@dataclass(frozen=True)
class GilbertElliottChannel:
    """两状态丢包信道

    Args:
        stay_good: v̄ = Pr(v_k=1 | v_{k-1}=1)
        recover: μ̄ = Pr(v_k=1 | v_{k-1}=0)
    """

    stay_good: float
    recover: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "stay_good", _check_probability(self.stay_good, "stay_good"))
        object.__setattr__(self, "recover", _check_probability(self.recover, "recover"))

    def success_probability(self, previous_success: bool) -> float:
        return self.stay_good if previous_success else self.recover


@dataclass(frozen=True, eq=False)
class ChannelBank:
    """m 条独立信道，信道 h 驱动执行器 h"""

    channels: Tuple[GilbertElliottChannel, ...]

    def __post_init__(self) -> None:
        channels = tuple(self.channels)
        if not channels:
            raise DimensionError("信道组至少需要一条信道")
        object.__setattr__(self, "channels", channels)

    @property
    def m(self) -> int:
        return len(self.channels)

    @cached_property
    def stay_good(self) -> np.ndarray:
        return np.array([c.stay_good for c in self.channels])

    @cached_property
    def recover(self) -> np.ndarray:
        return np.array([c.recover for c in self.channels])

    def __eq__(self, other) -> bool:
        return isinstance(other, ChannelBank) and self.channels == other.channels

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ModeData:
    """单个模态的系统矩阵 x_{k+1} = A x + B ξ u + D1 w，z = C x + D u"""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    D1: np.ndarray

    def __post_init__(self) -> None:
        for name in ("A", "B", "C", "D", "D1"):
            object.__setattr__(self, name, _as_matrix(getattr(self, name), name))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionError(f"A 必须是方阵，实际形状 {self.A.shape}")
        if self.B.shape[0] != n or self.D1.shape[0] != n or self.C.shape[1] != n:
            raise DimensionError(f"B/D1 行数与 C 列数必须等于状态维数 n={n}")
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise DimensionError(f"D 形状应为 {(self.C.shape[0], self.B.shape[1])}，实际为 {self.D.shape}")

    @property
    def dims(self) -> Tuple[int, int, int, int]:
        """(n, m, s, p)"""
        return self.A.shape[0], self.B.shape[1], self.D1.shape[1], self.C.shape[0]

    @cached_property
    def W(self) -> np.ndarray:
        """状态权重 CᵀC"""
        return symmetrize(self.C.T @ self.C)

    @cached_property
    def R(self) -> np.ndarray:
        """控制权重 DᵀD"""
        return symmetrize(self.D.T @ self.D)


@dataclass(frozen=True, eq=False)
class MjlsModel:
    """完整问题实例：模态矩阵、模态链、信道组、终端权重 W（缺省为 0）"""

    modes: Tuple[ModeData, ...]
    chain: MarkovChain
    bank: ChannelBank
    terminal_weight: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "modes", tuple(self.modes))
        check_dimensions(self)
        n = self.n
        if self.terminal_weight is None:
            weight = np.zeros((n, n))
            weight.setflags(write=False)
        else:
            weight = _as_matrix(self.terminal_weight, "terminal_weight")
            if weight.shape != (n, n):
                raise DimensionError(f"终端权重形状应为 {(n, n)}，实际为 {weight.shape}")
        object.__setattr__(self, "terminal_weight", weight)

    @property
    def n(self) -> int:
        return self.modes[0].dims[0]

    @property
    def m(self) -> int:
        return self.modes[0].dims[1]

    @property
    def s(self) -> int:
        return self.modes[0].dims[2]

    @property
    def p(self) -> int:
        return self.modes[0].dims[3]

    @property
    def num_modes(self) -> int:
        return len(self.modes)

    @property
    def num_outcomes(self) -> int:
        return 2 ** self.m

    @property
    def transition(self) -> np.ndarray:
        return self.chain.transition

    # 按模态堆叠的矩阵，形状 (𝓜, ·, ·)
    @cached_property
    def A(self) -> np.ndarray:
        return np.stack([mode.A for mode in self.modes])

    @cached_property
    def B(self) -> np.ndarray:
        return np.stack([mode.B for mode in self.modes])

    @cached_property
    def C(self) -> np.ndarray:
        return np.stack([mode.C for mode in self.modes])

    @cached_property
    def D(self) -> np.ndarray:
        return np.stack([mode.D for mode in self.modes])

    @cached_property
    def D1(self) -> np.ndarray:
        return np.stack([mode.D1 for mode in self.modes])

    @cached_property
    def W(self) -> np.ndarray:
        return np.stack([mode.W for mode in self.modes])

    @cached_property
    def R(self) -> np.ndarray:
        return np.stack([mode.R for mode in self.modes])


def check_dimensions(model: MjlsModel) -> None:
    """结构一致性检查，失败直接抛出 DimensionError"""
    if not model.modes:
        raise DimensionError("至少需要一个模态")
    dims = model.modes[0].dims
    for index, mode in enumerate(model.modes):
        if mode.dims != dims:
            raise DimensionError(f"模态 {index + 1} 的维数 (n,m,s,p)={mode.dims} 与模态 1 的 {dims} 不一致")
    if model.chain.num_states != len(model.modes):
        raise DimensionError(f"转移矩阵阶数 {model.chain.num_states} 与模态数 {len(model.modes)} 不一致")
    if model.bank.m != dims[1]:
        raise DimensionError(f"信道数 {model.bank.m} 与输入维数 m={dims[1]} 不一致")


@dataclass(frozen=True)
class Finding:
    """单条校验结论"""

    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    findings: Tuple[Finding, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.findings)

    def failures(self) -> List[Finding]:
        return [f for f in self.findings if not f.passed]

    def get(self, name: str) -> Finding:
        for finding in self.findings:
            if finding.name == name:
                return finding
        raise KeyError(name)


def _per_mode(model: MjlsModel, predicate) -> List[int]:
    """返回不满足条件的模态编号（1 起）"""
    return [i + 1 for i, mode in enumerate(model.modes) if not predicate(mode)]


def _mode_finding(name: str, failed: List[int], what: str) -> Finding:
    if failed:
        return Finding(name, False, f"模态 {failed} 不满足 {what}")
    return Finding(name, True, f"所有模态满足 {what}")


def validate_model(model: MjlsModel) -> ValidationReport:
    """逐条检查模型假设，每条假设一条结论

    Args:
        model: 待校验的问题实例

    Returns:
        ValidationReport: 全部通过时 passed 为 True
    """
    check_dimensions(model)
    chain = model.chain
    findings = []

    error = chain.row_sum_error()
    findings.append(Finding("row_stochastic", error <= EXACT_ZERO_TOL, f"行和最大偏差 {error:.3e}"))

    irreducible = chain.is_irreducible()
    findings.append(Finding("irreducible", irreducible, "正元素有向图强连通" if irreducible else "正元素有向图不强连通"))

    period = chain.period()
    findings.append(Finding("aperiodic", period == 1, f"周期 {period}"))

    findings.append(_mode_finding(
        "a_full_rank", _per_mode(model, lambda mode: np.linalg.matrix_rank(mode.A) == model.n), "A 满秩"))

    findings.append(_mode_finding(
        "no_cross_terms", _per_mode(model, lambda mode: np.max(np.abs(mode.C.T @ mode.D), initial=0.0) <= EXACT_ZERO_TOL),
        "CᵀD = 0"))

    findings.append(_mode_finding(
        "r_positive_definite", _per_mode(model, lambda mode: is_positive_definite(mode.R, PD_THRESHOLD)), "DᵀD ≻ 0"))

    terminal = model.terminal_weight
    findings.append(Finding("terminal_psd", is_positive_semidefinite(terminal, PD_THRESHOLD), "W ⪰ 0"))

    findings.append(_mode_finding(
        "mode_weight_dominates_terminal",
        _per_mode(model, lambda mode: is_positive_semidefinite(mode.W - terminal, PD_THRESHOLD)), "W(i) ⪰ W"))

    weak = [h + 1 for h, c in enumerate(model.bank.channels) if c.stay_good <= 0.0 or c.recover <= 0.0]
    findings.append(Finding("channel_probabilities_positive", not weak,
                            f"信道 {weak} 存在零成功概率" if weak else "所有信道 v̄, μ̄ > 0"))

    return ValidationReport(tuple(findings))


def stationary_mode_distribution(chain: MarkovChain) -> np.ndarray:
    """模态链的平稳分布 π（πᵀ𝒯 = πᵀ，Σπ = 1），最小二乘求解"""
    size = chain.num_states
    system = np.vstack([chain.transition.T - np.eye(size), np.ones((1, size))])
    rhs = np.concatenate([np.zeros(size), [1.0]])
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def with_channel(model: MjlsModel, index: int, field_name: str, value: float) -> MjlsModel:
    """返回替换了一条信道某个概率的模型副本

    Args:
        model: 原模型
        index: 信道编号（1 起）
        field_name: "stay_good" 或 "recover"
        value: 新概率
    """
    if field_name not in CHANNEL_FIELDS:
        raise DomainError(f"未知信道字段 {field_name}，可选 {CHANNEL_FIELDS}")
    if not 1 <= index <= model.bank.m:
        raise DomainError(f"信道编号 {index} 超出 1..{model.bank.m}")
    channels = list(model.bank.channels)
    channels[index - 1] = dataclasses.replace(channels[index - 1], **{field_name: value})
    return dataclasses.replace(model, bank=ChannelBank(tuple(channels)))


def build_model(modes: Sequence[dict], transition, channels: Sequence[Tuple[float, float]],
                terminal_weight=None) -> MjlsModel:
    """由原始嵌套列表构造模型（场景文件与测试共用）

    Args:
        modes: 每个模态一个字典，键 A, B, C, D, D1
        transition: 𝓜×𝓜 转移矩阵
        channels: (stay_good, recover) 序列
        terminal_weight: 终端权重，None 表示 0
    """
    return MjlsModel(
        modes=tuple(ModeData(**{key: mode[key] for key in ("A", "B", "C", "D", "D1")}) for mode in modes),
        chain=MarkovChain(transition),
        bank=ChannelBank(tuple(GilbertElliottChannel(v, mu) for v, mu in channels)),
        terminal_weight=terminal_weight,
    )
