#!/usr/bin/env python3
"""
分析服务模块 - 弱可观测性检验、临界衰减水平 γ_c 二分搜索、信道参数扫描
"""

import concurrent.futures
from collections import deque
from dataclasses import dataclass
from typing import Any, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from constants import (GAMMA_SEARCH_HI, GAMMA_SEARCH_HI_MAX, GAMMA_SEARCH_HORIZON_CAP, GAMMA_SEARCH_LO,
                       GAMMA_SEARCH_TOL, RANK_TOL)
from error_utils import DomainError, MJLSError
from log_utils import get_logger
from model_utils import MjlsModel, with_channel
from riccati_solver import DEFAULT_SETTINGS, SolveStatus, SolverSettings, solve_infinite_horizon


# ---------------------------------------------------------------- 弱可观测性

@dataclass(frozen=True)
class ObservabilityReport:
    """observable 为 False 只表示在搜索长度内没有找到见证路径"""

    observable: bool
    witness_path: Optional[Tuple[int, ...]]
    max_length_searched: int
    rank: int = 0


def numerical_rank(matrix: np.ndarray, tol: float = RANK_TOL) -> int:
    """奇异值大于 tol·σ_max 的个数"""
    if matrix.size == 0:
        return 0
    singular = np.linalg.svd(matrix, compute_uv=False)
    if singular[0] == 0.0:
        return 0
    return int(np.sum(singular > tol * singular[0]))


def observability_matrix(model: MjlsModel, path: Sequence[int]) -> np.ndarray:
    """沿模态路径堆叠 C(r_0), C(r_1)A(r_0), ..., C(r_{T-1})A(r_{T-2})...A(r_0)"""
    blocks = []
    propagation = np.eye(model.n)
    for mode in path:
        blocks.append(model.C[mode] @ propagation)
        propagation = model.A[mode] @ propagation
    return np.vstack(blocks)


def verify_witness(model: MjlsModel, path: Sequence[int]) -> bool:
    """独立复核见证路径：转移概率全为正且堆叠矩阵满列秩"""
    path = tuple(int(r) for r in path)
    if not path or any(not 0 <= r < model.num_modes for r in path):
        return False
    if any(model.transition[a, b] <= 0.0 for a, b in zip(path, path[1:])):
        return False
    return numerical_rank(observability_matrix(model, path)) == model.n


def weak_observability(model: MjlsModel, max_len: Optional[int] = None) -> ObservabilityReport:
    """按长度逐层（同层按字典序）搜索正概率模态路径，返回第一条满秩见证

    Args:
        model: 问题实例
        max_len: 最长路径长度，默认 n·𝓜

    Returns:
        ObservabilityReport: 观测性结论
    """
    logger = get_logger()
    max_len = model.n * model.num_modes if max_len is None else int(max_len)
    if max_len < 1:
        raise DomainError(f"最长路径长度必须 ≥ 1，实际为 {max_len}")

    # 队列元素：(路径, 已堆叠矩阵, A 的累积乘积)
    queue = deque(((mode,), model.C[mode], model.A[mode]) for mode in range(model.num_modes))
    best_rank = 0
    while queue:
        path, stacked, propagation = queue.popleft()
        rank = numerical_rank(stacked)
        best_rank = max(best_rank, rank)
        if rank == model.n:
            logger.debug(f"可观测见证路径: {[r + 1 for r in path]}")
            return ObservabilityReport(True, path, max_len, rank)
        if len(path) == max_len:
            continue
        last = path[-1]
        for nxt in range(model.num_modes):
            if model.transition[last, nxt] > 0.0:
                queue.append((path + (nxt,), np.vstack([stacked, model.C[nxt] @ propagation]),
                              model.A[nxt] @ propagation))
    logger.info(f"长度 ≤ {max_len} 的路径中没有满秩见证（最大秩 {best_rank}）")
    return ObservabilityReport(False, None, max_len, best_rank)


# ---------------------------------------------------------------- γ_c 搜索

@dataclass(frozen=True)
class GammaSearchSettings:
    lo: float = GAMMA_SEARCH_LO
    hi: float = GAMMA_SEARCH_HI
    hi_max: float = GAMMA_SEARCH_HI_MAX
    tol: float = GAMMA_SEARCH_TOL
    horizon_cap: int = GAMMA_SEARCH_HORIZON_CAP

    @classmethod
    def from_config(cls, section: Mapping[str, Any]) -> "GammaSearchSettings":
        return cls(
            lo=float(section.get("lo", GAMMA_SEARCH_LO)),
            hi=float(section.get("hi", GAMMA_SEARCH_HI)),
            hi_max=float(section.get("hi_max", GAMMA_SEARCH_HI_MAX)),
            tol=float(section.get("tol", GAMMA_SEARCH_TOL)),
            horizon_cap=int(section.get("horizon_cap", GAMMA_SEARCH_HORIZON_CAP)),
        )


@dataclass(frozen=True)
class BracketStep:
    """一次谓词评估：被测 γ、结果状态、评估后的区间"""

    gamma: float
    status: str
    accepted: bool
    lo: float
    hi: float


@dataclass(frozen=True)
class GammaSearchResult:
    gamma_c: Optional[float]
    found: bool
    bracket_log: Tuple[BracketStep, ...]
    square_disturbance: bool
    message: str = ""


def has_square_disturbance(model: MjlsModel) -> bool:
    """所有模态的 D1 都是满秩方阵"""
    return model.n == model.s and all(np.linalg.matrix_rank(mode.D1) == model.n for mode in model.modes)


def gamma_critical(model: MjlsModel, search: GammaSearchSettings = GammaSearchSettings(),
                   settings: SolverSettings = DEFAULT_SETTINGS) -> GammaSearchResult:
    """二分搜索无限时域迭代收敛的最小 γ，返回已验证可行的上端点

    谓词为 horizon_cap 次迭代内收敛；D1 为满秩方阵时 Θ ≻ 0 已足够，未收敛但未发散也算通过。

    Raises:
        DomainError: lo 处谓词已为真，lo 不是有效下界
    """
    logger = get_logger()
    relaxed = has_square_disturbance(model)
    log: List[BracketStep] = []

    def predicate(gamma: float) -> Tuple[bool, str]:
        result = solve_infinite_horizon(model, gamma, max_iter=search.horizon_cap, settings=settings)
        accepted = result.status is SolveStatus.CONVERGED or (relaxed and result.status is SolveStatus.INDETERMINATE)
        return accepted, result.status.value

    lo, hi = float(search.lo), float(search.hi)
    if not 0.0 < lo < hi:
        raise DomainError(f"搜索区间无效: lo={lo}, hi={hi}")

    accepted, status = predicate(lo)
    log.append(BracketStep(lo, status, accepted, lo, hi))
    if accepted:
        raise DomainError(f"γ={lo:g} 时已收敛，lo 不是有效下界")

    accepted, status = predicate(hi)
    log.append(BracketStep(hi, status, accepted, lo, hi))
    while not accepted:
        lo = hi
        hi *= 2.0
        if hi > search.hi_max:
            message = f"γ ≤ {search.hi_max:g} 范围内不存在有限的 γ_c"
            logger.info(message)
            return GammaSearchResult(None, False, tuple(log), relaxed, message)
        accepted, status = predicate(hi)
        log.append(BracketStep(hi, status, accepted, lo, hi))
        logger.debug(f"扩展上界: [{lo:g}, {hi:g}] ({status})")

    while hi - lo >= search.tol:
        middle = 0.5 * (lo + hi)
        accepted, status = predicate(middle)
        if accepted:
            hi = middle
        else:
            lo = middle
        log.append(BracketStep(middle, status, accepted, lo, hi))
        logger.debug(f"二分: γ={middle:.6g} {status}，区间 [{lo:.6g}, {hi:.6g}]")

    logger.info(f"γ_c ≈ {hi:.6g}（区间宽度 {hi - lo:.2e}）")
    return GammaSearchResult(hi, True, tuple(log), relaxed)


# ---------------------------------------------------------------- 参数扫描

@dataclass(frozen=True)
class SweepPoint:
    value: float
    gamma_c: Optional[float]
    message: str = ""


@dataclass(frozen=True)
class SweepTable:
    channel: int
    field_name: str
    points: Tuple[SweepPoint, ...] = ()

    def gamma_column(self) -> List[Optional[float]]:
        return [p.gamma_c for p in self.points]


def sweep(model: MjlsModel, channel: int, field_name: str, grid: Sequence[float],
          search: GammaSearchSettings = GammaSearchSettings(), settings: SolverSettings = DEFAULT_SETTINGS,
          max_workers: Optional[int] = None) -> SweepTable:
    """对一条信道的某个概率逐点计算 γ_c，单点失败记入表格不中断扫描

    Args:
        model: 基准模型
        channel: 信道编号（1 起）
        field_name: "stay_good" 或 "recover"
        grid: 取值列表，每个值位于 (0, 1]
        search: γ_c 搜索参数
        max_workers: 并行点数，结果按网格顺序合并
    """
    logger = get_logger()
    grid = [float(v) for v in grid]
    for value in grid:
        if not 0.0 < value <= 1.0:
            raise DomainError(f"扫描取值 {value} 不在 (0, 1] 内")
    variants = [with_channel(model, channel, field_name, value) for value in grid]

    def evaluate(item: Tuple[float, MjlsModel]) -> SweepPoint:
        value, variant = item
        try:
            result = gamma_critical(variant, search, settings)
        except MJLSError as e:
            logger.warning(f"扫描点 {field_name}[{channel}]={value:g} 失败: {e}")
            return SweepPoint(value, None, str(e))
        return SweepPoint(value, result.gamma_c, result.message)

    items = list(zip(grid, variants))
    if max_workers and max_workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
            points = list(executor.map(evaluate, items))
    else:
        points = [evaluate(item) for item in items]
    return SweepTable(channel, field_name, tuple(points))
