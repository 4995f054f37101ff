#!/usr/bin/env python3
# 小规模稠密矩阵工具模块 - 对称化、正定判定、基于分解的线性求解

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from constants import PD_THRESHOLD, EXACT_ZERO_TOL, CONDITION_LIMIT


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    """返回 (M + Mᵀ)/2，支持批量（最后两维为矩阵）"""
    return 0.5 * (matrix + np.swapaxes(matrix, -1, -2))


def min_eigenvalue(matrix: np.ndarray) -> float:
    """对称矩阵的最小特征值"""
    if matrix.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(symmetrize(matrix))[0])


def definiteness_floor(matrix: np.ndarray, threshold: float = PD_THRESHOLD) -> float:
    """正定判定使用的相对阈值 threshold·max(1, ‖M‖₂)"""
    scale = np.linalg.norm(matrix, 2) if matrix.size else 0.0
    return threshold * max(1.0, float(scale))


def is_positive_definite(matrix: np.ndarray, threshold: float = PD_THRESHOLD) -> bool:
    """正定判定：Cholesky 分解成功且最小特征值高于相对阈值

    Args:
        matrix: 方阵（按对称部分判定）
        threshold: 相对阈值系数

    Returns:
        bool: 是否正定
    """
    if not np.all(np.isfinite(matrix)):
        return False
    sym = symmetrize(matrix)
    try:
        linalg.cholesky(sym, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return False
    return min_eigenvalue(sym) > definiteness_floor(sym, threshold)


def is_positive_semidefinite(matrix: np.ndarray, threshold: float = PD_THRESHOLD) -> bool:
    """半正定判定：最小特征值不低于 -threshold·max(1, ‖M‖)"""
    if not np.all(np.isfinite(matrix)):
        return False
    sym = symmetrize(matrix)
    return min_eigenvalue(sym) >= -definiteness_floor(sym, threshold)


def is_symmetric(matrix: np.ndarray, tol: float = EXACT_ZERO_TOL) -> bool:
    """逐元素检查 |M - Mᵀ| ≤ tol"""
    return bool(np.max(np.abs(matrix - matrix.T), initial=0.0) <= tol)


@dataclass
class SolveOutcome:
    """线性求解结果；失败时 solution 为空并附带原因"""

    solution: Optional[np.ndarray]
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.solution is not None


def solve_positive_definite(matrix: np.ndarray, rhs: np.ndarray,
                            threshold: float = PD_THRESHOLD) -> SolveOutcome:
    """用 Cholesky 分解求解 M X = rhs，M 必须正定"""
    if not is_positive_definite(matrix, threshold):
        return SolveOutcome(None, "矩阵不正定")
    factor = linalg.cho_factor(symmetrize(matrix), lower=True, check_finite=False)
    return SolveOutcome(linalg.cho_solve(factor, rhs, check_finite=False))


def solve_general(matrix: np.ndarray, rhs: np.ndarray, condition_limit: float = CONDITION_LIMIT) -> SolveOutcome:
    """LU 求解一般方阵系统，条件数超过上限视为病态"""
    if matrix.size == 0:
        return SolveOutcome(np.zeros_like(rhs))
    cond = np.linalg.cond(matrix)
    if not np.isfinite(cond) or cond > condition_limit:
        return SolveOutcome(None, f"条件数过大 ({cond:.3e})")
    try:
        return SolveOutcome(linalg.solve(matrix, rhs, check_finite=False))
    except linalg.LinAlgError as e:
        return SolveOutcome(None, f"线性求解失败: {e}")
