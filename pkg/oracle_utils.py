#!/usr/bin/env python3
# 暴力参考解模块 - 网格鞍点、全树枚举博弈值、经典 H∞ Riccati 一步更新
#
# 本模块只依赖 numpy/scipy 的基本运算，不调用 matrix_utils、channel_utils 中的求解核，
# 结果分布与二次型系数都在这里独立计算。

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import block_diag

from constants import (ORACLE_GRID_LOWER, ORACLE_GRID_STEP, ORACLE_GRID_UPPER, ORACLE_MAX_GRID_POINTS,
                       ORACLE_MAX_LEAVES)
from error_utils import DomainError, OracleError
from log_utils import get_logger
from model_utils import MjlsModel
from riccati_solver import controller_gain, solve_finite_horizon


@dataclass(frozen=True)
class GridSpec:
    """每个坐标上的等距网格 [lower, upper]，步长 step"""

    lower: float = ORACLE_GRID_LOWER
    upper: float = ORACLE_GRID_UPPER
    step: float = ORACLE_GRID_STEP
    max_points: int = ORACLE_MAX_GRID_POINTS

    def __post_init__(self) -> None:
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)) or self.upper <= self.lower:
            raise DomainError(f"网格边界无效: [{self.lower}, {self.upper}]")
        if not np.isfinite(self.step) or self.step <= 0.0:
            raise DomainError(f"网格步长必须为正，实际为 {self.step}")

    @property
    def points_per_axis(self) -> int:
        return int(np.floor((self.upper - self.lower) / self.step + 1e-9)) + 1

    def axis(self) -> np.ndarray:
        return self.lower + self.step * np.arange(self.points_per_axis)

    def points(self, dimension: int) -> np.ndarray:
        """全部网格点，形状 (点数, dimension)"""
        count = self.points_per_axis ** dimension
        if count > self.max_points:
            raise DomainError(f"网格点数 {count} 超过上限 {self.max_points}")
        axes = np.meshgrid(*([self.axis()] * dimension), indexing="ij")
        return np.stack([a.reshape(-1) for a in axes], axis=1)

    def on_boundary(self, point: np.ndarray) -> bool:
        edge = 0.5 * self.step
        return bool(np.any(point <= self.lower + edge) or np.any(point >= self.axis()[-1] - edge))


def _success_table(m: int) -> np.ndarray:
    return np.array([[(l >> h) & 1 for h in range(m)] for l in range(2 ** m)], dtype=bool)


def _outcome_probabilities(stay_good: np.ndarray, recover: np.ndarray, prior: Optional[int]) -> np.ndarray:
    """先验为 None 时用平稳分布"""
    m = len(stay_good)
    table = _success_table(m)
    if prior is None:
        success = recover / (1.0 + recover - stay_good)
    else:
        success = np.where(table[prior], stay_good, recover)
    return np.array([np.prod([success[h] if row[h] else 1.0 - success[h] for h in range(m)]) for row in table])


@dataclass(frozen=True)
class GridSaddle:
    u: np.ndarray
    w: np.ndarray
    value: float


def _quadratic_form(model: MjlsModel, gamma: float, i: int, probs: np.ndarray, X: np.ndarray, x: np.ndarray):
    """把 H(u, w) 整理为 c + aᵤᵀu + a_wᵀw + uᵀPuu u + wᵀPww w + 2uᵀPuw w"""
    A, B, C, D, D1 = (np.asarray(M) for M in (model.A[i], model.B[i], model.C[i], model.D[i], model.D1[i]))
    m = B.shape[1]
    table = _success_table(m)
    c = float(np.sum((C @ x) ** 2))
    a_u = np.zeros(m)
    a_w = np.zeros(D1.shape[1])
    p_uu = np.zeros((m, m))
    p_ww = -gamma ** 2 * np.eye(D1.shape[1])
    p_uw = np.zeros((m, D1.shape[1]))
    for l, p in enumerate(probs):
        if p == 0.0:
            continue
        mask = np.diag(table[l].astype(float))
        Bl, Dl = B @ mask, D @ mask
        drift = A @ x
        c += p * float(drift @ X[l] @ drift)
        a_u += p * (2.0 * Bl.T @ X[l] @ drift + 2.0 * Dl.T @ C @ x)
        a_w += p * 2.0 * D1.T @ X[l] @ drift
        p_uu += p * (Bl.T @ X[l] @ Bl + Dl.T @ Dl)
        p_ww += p * D1.T @ X[l] @ D1
        p_uw += p * Bl.T @ X[l] @ D1
    return c, a_u, a_w, p_uu, p_ww, p_uw


def grid_saddle(model: MjlsModel, gamma: float, i: int, probs: Union[np.ndarray, Sequence[float]], X: np.ndarray,
                x: np.ndarray, grid_u: GridSpec = GridSpec(), grid_w: GridSpec = GridSpec(),
                chunk_elements: int = 4_000_000) -> GridSaddle:
    """网格上求 min_u max_w H(u, w)

    Args:
        model: 问题实例（u、w 维数应为 1 或 2）
        gamma: 衰减水平
        i: 模态
        probs: 本步结果概率（长度 2^m 的向量或带 probs 属性的分布对象）
        X: 𝒳(i, ·)，形状 (2^m, n, n)
        x: 当前状态
        grid_u, grid_w: 两个玩家的网格

    Returns:
        GridSaddle: 网格上的鞍点与值

    Raises:
        OracleError: 鞍点落在网格边界上（需要放宽边界）
    """
    probs = np.asarray(getattr(probs, "probs", probs), dtype=float)
    X = np.asarray(X, dtype=float)
    x = np.asarray(x, dtype=float).reshape(-1)
    if model.m > 2 or model.s > 2:
        raise DomainError("网格参考解只支持 1 或 2 维的 u、w")
    c, a_u, a_w, p_uu, p_ww, p_uw = _quadratic_form(model, gamma, i, probs, X, x)

    us = grid_u.points(model.m)
    ws = grid_w.points(model.s)
    w_part = ws @ a_w + np.einsum("ka,ab,kb->k", ws, p_ww, ws)
    u_part = c + us @ a_u + np.einsum("ka,ab,kb->k", us, p_uu, us)
    coupling = 2.0 * us @ p_uw

    rows = max(1, chunk_elements // len(ws))
    inner_max = np.empty(len(us))
    inner_arg = np.empty(len(us), dtype=np.int64)
    for start in range(0, len(us), rows):
        block = coupling[start:start + rows] @ ws.T + w_part[None, :]
        inner_arg[start:start + rows] = np.argmax(block, axis=1)
        inner_max[start:start + rows] = block[np.arange(block.shape[0]), inner_arg[start:start + rows]]
    totals = u_part + inner_max
    best = int(np.argmin(totals))
    u_star, w_star = us[best], ws[inner_arg[best]]
    if grid_u.on_boundary(u_star) or grid_w.on_boundary(w_star):
        raise OracleError(f"网格鞍点落在边界上 (u={u_star}, w={w_star})，请放宽网格边界")
    return GridSaddle(u=u_star, w=w_star, value=float(totals[best]))


def classical_hinf_step(A: np.ndarray, B: np.ndarray, D1: np.ndarray, Q: np.ndarray, R: np.ndarray, gamma: float,
                        P_next: np.ndarray) -> np.ndarray:
    """标准离散时间状态反馈 H∞ Riccati 一步更新
    P = Q + AᵀPA − AᵀP[B D1] (blkdiag(R, −γ²I) + [B D1]ᵀP[B D1])⁻¹ [B D1]ᵀPA
    """
    A, B, D1, Q, R, P_next = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, D1, Q, R, P_next))
    s = D1.shape[1]
    concavity = gamma ** 2 * np.eye(s) - D1.T @ P_next @ D1
    if np.min(np.linalg.eigvalsh(0.5 * (concavity + concavity.T))) <= 0.0:
        raise OracleError("γ²I − D1ᵀPD1 不正定，该 γ 下一步更新不存在")
    G = np.hstack([B, D1])
    middle = block_diag(R, -gamma ** 2 * np.eye(s)) + G.T @ P_next @ G
    P = Q + A.T @ P_next @ A - A.T @ P_next @ G @ np.linalg.solve(middle, G.T @ P_next @ A)
    return 0.5 * (P + P.T)


def classical_hinf_chain(A, B, D1, Q, R, gamma: float, P_terminal: np.ndarray, steps: int) -> list:
    """从终端矩阵连续做 steps 次更新，返回 [P_N, P_{N-1}, ..., P_{N-steps}]"""
    chain = [np.atleast_2d(np.asarray(P_terminal, dtype=float))]
    for _ in range(steps):
        chain.append(classical_hinf_step(A, B, D1, Q, R, gamma, chain[-1]))
    return chain


def enumerate_value(model: MjlsModel, gamma: float, horizon: int, x0: np.ndarray, r0: int,
                    max_leaves: int = ORACLE_MAX_LEAVES, solution=None) -> float:
    """沿全部模态路径与信道结果路径展开，按求解器的 (u*, w*) 策略累计期望代价

    Args:
        model: 问题实例
        gamma: 衰减水平
        horizon: 时域 N
        x0: 初始状态
        r0: 初始模态（0 起）
        max_leaves: 叶子数上限
        solution: 已有的有限时域解，省略时现场求解

    Returns:
        float: E[Σ ‖z_k‖² − γ²‖w_k‖² + x_Nᵀ W x_N]
    """
    branching = model.num_modes * model.num_outcomes
    leaves = branching ** horizon
    if leaves > max_leaves:
        raise OracleError(f"枚举树叶子数 {leaves} 超过上限 {max_leaves}")
    if solution is None:
        solution = solve_finite_horizon(model, gamma, horizon)
    if not solution.feasible:
        raise OracleError(f"γ={gamma:g} 时有限时域解不可行，无法枚举")

    stay_good = np.array([c.stay_good for c in model.bank.channels])
    recover = np.array([c.recover for c in model.bank.channels])
    table = _success_table(model.m).astype(float)
    transition = model.transition
    terminal = np.asarray(model.terminal_weight)
    get_logger().debug(f"枚举博弈值: N={horizon}, 叶子数 {leaves}")

    def expand(k: int, x: np.ndarray, mode: int, prior: Optional[int]) -> float:
        if k == horizon:
            return float(x @ terminal @ x)
        gain, psi = controller_gain(solution, k, mode, 0 if prior is None else prior)
        u = -gain @ x
        w = psi @ x
        total = 0.0
        probs = _outcome_probabilities(stay_good, recover, prior)
        for l, next_mode in itertools.product(range(len(probs)), range(model.num_modes)):
            weight = probs[l] * transition[mode, next_mode]
            if weight == 0.0:
                continue
            applied = table[l] * u
            z = model.C[mode] @ x + model.D[mode] @ applied
            cost = float(z @ z) - gamma ** 2 * float(w @ w)
            x_next = model.A[mode] @ x + model.B[mode] @ applied + model.D1[mode] @ w
            total += weight * (cost + expand(k + 1, x_next, next_mode, l))
        return total

    return expand(0, np.asarray(x0, dtype=float).reshape(-1), int(r0), None)
