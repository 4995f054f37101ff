#!/usr/bin/env python3
# 耦合 Riccati 递推模块 - 有限时域逆向递推、可行性判定、博弈值、无限时域不动点与增益提取
#
# 约定：模态 i、结果 j 在程序内部均从 0 开始编号；Ξ 等按 (i, j) 存为形状 (𝓜, 2^m, ·, ·) 的数组。

import concurrent.futures
import dataclasses
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from channel_utils import (STATIONARY, OutcomeDistribution, PriorLike, all_conditional_distributions,
                           check_outcome_index, outcome_distribution, outcome_masks)
from constants import (CONDITION_LIMIT, DIVERGENCE_BOUND, FIXED_POINT_MAX_ITER, FIXED_POINT_TOL, PARALLEL_GRID_MIN_CELLS,
                       PD_THRESHOLD, SYMMETRY_TOL)
from error_utils import ConfigurationError, DomainError
from log_utils import get_logger, log_function_call
from matrix_utils import is_positive_definite, solve_general, solve_positive_definite, symmetrize
from model_utils import MarkovChain, MjlsModel


class SolveStatus(Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    INFEASIBLE = "infeasible"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class SolverSettings:
    """数值阈值与迭代控制（对应配置文件 solver 段）"""

    tolerance: float = FIXED_POINT_TOL
    max_iterations: int = FIXED_POINT_MAX_ITER
    divergence_bound: float = DIVERGENCE_BOUND
    pd_threshold: float = PD_THRESHOLD
    condition_limit: float = CONDITION_LIMIT
    symmetry_tolerance: float = SYMMETRY_TOL
    max_workers: Optional[int] = None
    parallel_min_cells: int = PARALLEL_GRID_MIN_CELLS

    @classmethod
    def from_config(cls, section: Mapping[str, Any], max_workers: Optional[int] = None) -> "SolverSettings":
        return cls(
            tolerance=float(section.get("tolerance", FIXED_POINT_TOL)),
            max_iterations=int(section.get("max_iterations", FIXED_POINT_MAX_ITER)),
            divergence_bound=float(section.get("divergence_bound", DIVERGENCE_BOUND)),
            pd_threshold=float(section.get("pd_threshold", PD_THRESHOLD)),
            condition_limit=float(section.get("condition_limit", CONDITION_LIMIT)),
            symmetry_tolerance=float(section.get("symmetry_tolerance", SYMMETRY_TOL)),
            max_workers=max_workers,
        )


DEFAULT_SETTINGS = SolverSettings()


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma <= 0.0:
        raise DomainError(f"衰减水平 γ 必须为正数，实际为 {gamma}")
    return gamma


# ---------------------------------------------------------------- 单阶段

def coupled_expectation(next_xi: Union[np.ndarray, Mapping[Tuple[int, int], np.ndarray]], chain: MarkovChain,
                        i: int) -> np.ndarray:
    """𝒳(i, l) = Σ_d p_id Ξ(d, l)

    Args:
        next_xi: 下一阶段的 Ξ，形状 (𝓜, 2^m, n, n) 的数组或以 (d, l) 为键的字典
        chain: 模态链
        i: 当前模态

    Returns:
        np.ndarray: 形状 (2^m, n, n)
    """
    if isinstance(next_xi, Mapping):
        modes = chain.num_states
        outcomes = 1 + max(l for _, l in next_xi)
        next_xi = np.stack([np.stack([np.asarray(next_xi[(d, l)], dtype=float) for l in range(outcomes)])
                            for d in range(modes)])
    return symmetrize(np.tensordot(chain.transition[i], next_xi, axes=1))


@dataclass(frozen=True, eq=False)
class StageQuantities:
    """一个 (i, 先验) 上的中间量；不可行时 psi、gamma_gain 为空"""

    theta: np.ndarray
    lam: np.ndarray
    expected_x: np.ndarray
    expected_cross: np.ndarray
    expected_r: np.ndarray
    feasible: bool
    psi: Optional[np.ndarray] = None
    gamma_gain: Optional[np.ndarray] = None
    reason: str = ""


def _expectations(model: MjlsModel, i: int, dist: OutcomeDistribution, X: np.ndarray):
    """L(𝒳), Λ = L(ℛ), L(𝒯) 与 L(𝒬)"""
    probs = dist.probs
    masks = outcome_masks(model.m)
    B, R = model.B[i], model.R[i]
    expected_x = np.tensordot(probs, X, axes=1)
    # 𝒩(l) Bᵀ 𝒳(i,l)
    cross = np.einsum("lab,cb,lcd->lad", masks, B, X)
    expected_cross = np.tensordot(probs, cross, axes=1)
    expected_r = np.tensordot(probs, masks @ R @ masks, axes=1)
    lam = expected_r + np.tensordot(probs, cross @ B @ masks, axes=1)
    return symmetrize(expected_x), symmetrize(lam), expected_cross, symmetrize(expected_r)


def stage_quantities(model: MjlsModel, gamma: float, i: int, dist: OutcomeDistribution, X: np.ndarray,
                     settings: SolverSettings = DEFAULT_SETTINGS) -> StageQuantities:
    """计算 Θ、Λ，先求 Ψ 再求 Γ

    Args:
        model: 问题实例
        gamma: 衰减水平 γ
        i: 模态
        dist: 本步结果分布
        X: 𝒳(i, ·)，形状 (2^m, n, n)

    Returns:
        StageQuantities: Θ 不正定或括号内矩阵病态时 feasible 为 False
    """
    X = np.asarray(X, dtype=float)
    if X.shape != (model.num_outcomes, model.n, model.n):
        raise DomainError(f"𝒳 形状应为 {(model.num_outcomes, model.n, model.n)}，实际为 {X.shape}")
    A, D1 = model.A[i], model.D1[i]
    expected_x, lam, expected_cross, expected_r = _expectations(model, i, dist, X)
    theta = symmetrize(gamma ** 2 * np.eye(model.s) - D1.T @ expected_x @ D1)
    parts = dict(theta=theta, lam=lam, expected_x=expected_x, expected_cross=expected_cross, expected_r=expected_r)

    if not is_positive_definite(theta, settings.pd_threshold):
        return StageQuantities(feasible=False, reason="Θ 不正定", **parts)

    lam_solve = solve_positive_definite(lam, expected_cross, settings.pd_threshold)
    if not lam_solve.ok:
        raise ConfigurationError(f"模态 {i + 1} 的 Λ 不正定，检查信道送达概率与 DᵀD")
    lam_inv_cross = lam_solve.solution
    coupling = expected_cross.T @ lam_inv_cross
    bracket = symmetrize(theta + D1.T @ coupling @ D1)
    psi_solve = solve_general(bracket, D1.T @ (expected_x - coupling) @ A, settings.condition_limit)
    if not psi_solve.ok:
        return StageQuantities(feasible=False, reason=f"Ψ 方程: {psi_solve.reason}", **parts)
    psi = psi_solve.solution
    gamma_gain = lam_inv_cross @ (A + D1 @ psi)
    return StageQuantities(feasible=True, psi=psi, gamma_gain=gamma_gain, **parts)


def stage_value_matrix(model: MjlsModel, gamma: float, i: int, dist: OutcomeDistribution, X: np.ndarray,
                       gamma_gain: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """给定增益 (Γ, Ψ) 时的阶段价值矩阵
    W(i) + ΓᵀL(𝒬)Γ − γ²ΨᵀΨ + Σ_l P(l)(A − B𝒩(l)Γ + D1Ψ)ᵀ 𝒳(i,l) (A − B𝒩(l)Γ + D1Ψ)
    """
    A, B, D1 = model.A[i], model.B[i], model.D1[i]
    masks = outcome_masks(model.m)
    probs = dist.probs
    expected_r = np.tensordot(probs, masks @ model.R[i] @ masks, axes=1)
    closed = A + D1 @ psi - B @ masks @ gamma_gain
    propagated = np.tensordot(probs, np.swapaxes(closed, 1, 2) @ X @ closed, axes=1)
    value = model.W[i] + gamma_gain.T @ expected_r @ gamma_gain - gamma ** 2 * psi.T @ psi + propagated
    return symmetrize(value)


def saddle_functional(model: MjlsModel, gamma: float, i: int, dist: OutcomeDistribution, X: np.ndarray,
                      x: np.ndarray, u: np.ndarray, w: np.ndarray) -> float:
    """一步博弈泛函 H(u, w)：阶段代价减去 γ²‖w‖²，加上下一状态在 𝒳 下的期望值"""
    A, B, D1 = model.A[i], model.B[i], model.D1[i]
    x, u, w = (np.asarray(v, dtype=float).reshape(-1) for v in (x, u, w))
    masks = outcome_masks(model.m)
    total = float(x @ model.W[i] @ x) - gamma ** 2 * float(w @ w)
    for l, p in enumerate(dist.probs):
        if p == 0.0:
            continue
        applied = masks[l] @ u
        nxt = A @ x + B @ applied + D1 @ w
        total += p * (float(applied @ model.R[i] @ applied) + float(nxt @ X[l] @ nxt))
    return total


def saddle_hessians(model: MjlsModel, gamma: float, i: int, dist: OutcomeDistribution,
                    X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """H 对 u、w 的 Hessian，分别为 2Λ 与 −2Θ"""
    expected_x, lam, _, _ = _expectations(model, i, dist, np.asarray(X, dtype=float))
    D1 = model.D1[i]
    theta = gamma ** 2 * np.eye(model.s) - D1.T @ expected_x @ D1
    return 2.0 * lam, -2.0 * symmetrize(theta)


# ---------------------------------------------------------------- 整阶段

@dataclass(frozen=True)
class StageFailure:
    stage: Optional[int]
    mode: int
    prior: int
    reason: str


@dataclass(frozen=True, eq=False)
class StageSolution:
    """某一阶段全部 (i, j) 的解；终端阶段只有 Ξ = W，增益为空"""

    xi: np.ndarray
    feasible: bool = True
    gamma_gain: Optional[np.ndarray] = None
    psi: Optional[np.ndarray] = None
    theta: Optional[np.ndarray] = None
    lam: Optional[np.ndarray] = None
    stationary: bool = False
    failure: Optional[StageFailure] = None

    @classmethod
    def terminal(cls, model: MjlsModel) -> "StageSolution":
        xi = np.broadcast_to(model.terminal_weight, (model.num_modes, model.num_outcomes, model.n, model.n)).copy()
        return cls(xi=xi)

    @property
    def is_terminal(self) -> bool:
        return self.gamma_gain is None and self.failure is None

    def collapse_spread(self) -> float:
        """各模态下 Ξ(i, j) 在 j 方向的最大差"""
        return float(np.max(np.abs(self.xi - self.xi[:, :1]), initial=0.0))


def _stage_grid(model: MjlsModel, gamma: float, next_xi: np.ndarray, distributions: List[OutcomeDistribution],
                settings: SolverSettings) -> StageSolution:
    num_modes, num_outcomes = model.num_modes, model.num_outcomes
    expected = [coupled_expectation(next_xi, model.chain, i) for i in range(num_modes)]
    tasks = [(i, j) for i in range(num_modes) for j in range(num_outcomes)]

    def evaluate(task):
        i, j = task
        quantities = stage_quantities(model, gamma, i, distributions[j], expected[i], settings)
        if not quantities.feasible:
            return quantities, None
        xi = stage_value_matrix(model, gamma, i, distributions[j], expected[i], quantities.gamma_gain,
                                quantities.psi)
        return quantities, xi

    if settings.max_workers and settings.max_workers > 1 and len(tasks) >= settings.parallel_min_cells:
        with concurrent.futures.ThreadPoolExecutor(max_workers=settings.max_workers) as executor:
            results = list(executor.map(evaluate, tasks))
    else:
        results = [evaluate(task) for task in tasks]

    shape = (num_modes, num_outcomes)
    theta = np.stack([q.theta for q, _ in results]).reshape(shape + (model.s, model.s))
    lam = np.stack([q.lam for q, _ in results]).reshape(shape + (model.m, model.m))
    failure = next((StageFailure(None, i, j, q.reason) for (i, j), (q, _) in zip(tasks, results) if not q.feasible),
                   None)
    if failure is not None:
        return StageSolution(xi=np.asarray(next_xi), feasible=False, theta=theta, lam=lam, failure=failure)
    return StageSolution(
        xi=np.stack([xi for _, xi in results]).reshape(shape + (model.n, model.n)),
        gamma_gain=np.stack([q.gamma_gain for q, _ in results]).reshape(shape + (model.m, model.n)),
        psi=np.stack([q.psi for q, _ in results]).reshape(shape + (model.s, model.n)),
        theta=theta,
        lam=lam,
    )


def backward_step(model: MjlsModel, gamma: float, next_stage: Union[StageSolution, np.ndarray],
                  stationary: bool = False, settings: SolverSettings = DEFAULT_SETTINGS) -> StageSolution:
    """由下一阶段的 Ξ 计算本阶段全部 (i, j)

    Args:
        model: 问题实例
        gamma: 衰减水平
        next_stage: 下一阶段解，或终端权重 W（n×n）
        stationary: True 时所有先验都用平稳结果分布（第 0 阶段）
        settings: 数值阈值

    Returns:
        StageSolution: 任一 (i, j) 不可行则整阶段不可行，failure 记录第一个失败位置
    """
    gamma = _check_gamma(gamma)
    if isinstance(next_stage, StageSolution):
        if not next_stage.feasible:
            raise DomainError("下一阶段不可行，无法继续逆向递推")
        next_xi = next_stage.xi
    else:
        weight = np.asarray(next_stage, dtype=float)
        next_xi = np.broadcast_to(weight, (model.num_modes, model.num_outcomes, model.n, model.n))
    if stationary:
        distributions = [outcome_distribution(model.bank, STATIONARY)] * model.num_outcomes
    else:
        distributions = [OutcomeDistribution(row) for row in all_conditional_distributions(model.bank)]
    solution = _stage_grid(model, gamma, next_xi, distributions, settings)
    if stationary:
        return dataclasses.replace(solution, stationary=True)
    return solution


# ---------------------------------------------------------------- 有限时域

@dataclass(frozen=True, eq=False)
class FiniteHorizonSolution:
    """有限时域解；stages[k] 为第 k 阶段（k = 0..N），第 N 阶段为终端"""

    gamma: float
    horizon: int
    stages: Dict[int, StageSolution]
    feasible: bool
    failure: Optional[StageFailure] = None
    collapse_spread: float = 0.0

    @property
    def xi_hat(self) -> Optional[np.ndarray]:
        """第 0 阶段按模态的价值矩阵 Ξ̂_{0,N}(i)"""
        if not self.feasible:
            return None
        return self.stages[0].xi[:, 0]

    def game_value(self, x0: np.ndarray, r0: int) -> float:
        if not self.feasible:
            raise ConfigurationError("有限时域解不可行，没有博弈值")
        x0 = np.asarray(x0, dtype=float)
        return float(x0 @ self.xi_hat[r0] @ x0)

    def gains(self, k: int, mode: int, prior: PriorLike) -> Tuple[np.ndarray, np.ndarray]:
        if not self.feasible:
            raise ConfigurationError("有限时域解不可行，没有可用增益")
        if not 0 <= k < self.horizon:
            raise DomainError(f"阶段 {k} 超出 [0, {self.horizon - 1}]")
        stage = self.stages[k]
        if k == 0 or prior is STATIONARY:
            stage, prior = self.stages[0], 0
        else:
            prior = check_outcome_index(prior, self.stages[k].gamma_gain.shape[1].bit_length() - 1)
        return stage.gamma_gain[mode, prior], stage.psi[mode, prior]


@log_function_call
def solve_finite_horizon(model: MjlsModel, gamma: float, horizon: int,
                         settings: SolverSettings = DEFAULT_SETTINGS) -> FiniteHorizonSolution:
    """逆向递推 N..0，第 N..1 阶段用条件分布，第 0 阶段用平稳分布；遇到不可行立即停止"""
    logger = get_logger()
    gamma = _check_gamma(gamma)
    if int(horizon) < 1:
        raise DomainError(f"时域 N 必须 ≥ 1，实际为 {horizon}")
    horizon = int(horizon)
    logger.info(f"有限时域求解开始: γ={gamma:g}, N={horizon}")

    stages = {horizon: StageSolution.terminal(model)}
    for k in range(horizon - 1, -1, -1):
        stage = backward_step(model, gamma, stages[k + 1], stationary=(k == 0), settings=settings)
        if not stage.feasible:
            failure = StageFailure(k, stage.failure.mode, stage.failure.prior, stage.failure.reason)
            logger.warning(f"第 {k} 阶段不可行: 模态 {failure.mode + 1}, 先验 {failure.prior}, 原因 {failure.reason}")
            return FiniteHorizonSolution(gamma, horizon, stages, feasible=False, failure=failure)
        stages[k] = stage

    spread = stages[0].collapse_spread()
    if spread > settings.symmetry_tolerance:
        logger.error(f"第 0 阶段价值矩阵随先验变化 {spread:.3e}，超过容差")
    logger.info(f"有限时域求解完成: γ={gamma:g}, N={horizon}, 可行")
    return FiniteHorizonSolution(gamma, horizon, stages, feasible=True, collapse_spread=spread)


@dataclass(frozen=True)
class ValueSeries:
    """J_N，N = 1..len(values)；first_infeasible 为第一个不可行的 N"""

    gamma: float
    values: Tuple[float, ...]
    first_infeasible: Optional[int] = None
    diverged: bool = False

    @property
    def horizons(self) -> Tuple[int, ...]:
        return tuple(range(1, len(self.values) + 1))

    def relative_changes(self) -> Tuple[Optional[float], ...]:
        """|J_N − J_{N−1}| / max(|J_N|, 1e-300)，N=1 为空"""
        changes: List[Optional[float]] = [None]
        for previous, current in zip(self.values, self.values[1:]):
            changes.append(abs(current - previous) / max(abs(current), 1e-300))
        return tuple(changes)


def value_series(model: MjlsModel, gamma: float, max_horizon: int, x0: np.ndarray, r0: int,
                 settings: SolverSettings = DEFAULT_SETTINGS) -> ValueSeries:
    """一次逆向遍历得到全部 J_N

    时移不变性：Ξ̂_{0,N} 等于对 W 施加 N−1 次条件阶段映射后再做一次平稳阶段映射。
    """
    logger = get_logger()
    gamma = _check_gamma(gamma)
    x0 = np.asarray(x0, dtype=float)
    values: List[float] = []
    current: Union[StageSolution, np.ndarray] = model.terminal_weight
    for horizon in range(1, int(max_horizon) + 1):
        stage0 = backward_step(model, gamma, current, stationary=True, settings=settings)
        if not stage0.feasible:
            logger.warning(f"N={horizon} 时第 0 阶段不可行")
            return ValueSeries(gamma, tuple(values), first_infeasible=horizon)
        value = float(x0 @ stage0.xi[r0, 0] @ x0)
        values.append(value)
        if not np.isfinite(value) or np.max(np.abs(stage0.xi)) > settings.divergence_bound:
            logger.warning(f"N={horizon} 时价值超过发散界")
            return ValueSeries(gamma, tuple(values), diverged=True)
        if horizon == max_horizon:
            break
        current = backward_step(model, gamma, current, settings=settings)
        if not current.feasible:
            logger.warning(f"N={horizon + 1} 时条件阶段不可行")
            return ValueSeries(gamma, tuple(values), first_infeasible=horizon + 1)
    return ValueSeries(gamma, tuple(values))


# ---------------------------------------------------------------- 无限时域

@dataclass(frozen=True, eq=False)
class FixedPointSolution:
    """平稳解：k ≥ 1 的 Ξ̄(i,j)、Γ̄、Ψ̄、Θ̄、Λ̄ 与 k = 0 的 Ξ̄̂(i)、Γ̄̂、Ψ̄̂"""

    gamma: float
    xi_bar: np.ndarray
    gamma_bar: np.ndarray
    psi_bar: np.ndarray
    theta_bar: np.ndarray
    lambda_bar: np.ndarray
    xi_hat: np.ndarray
    gamma_hat: np.ndarray
    psi_hat: np.ndarray
    iterations: int
    residual: float

    def game_value(self, x0: np.ndarray, r0: int) -> float:
        x0 = np.asarray(x0, dtype=float)
        return float(x0 @ self.xi_hat[r0] @ x0)

    def gains(self, k: int, mode: int, prior: PriorLike) -> Tuple[np.ndarray, np.ndarray]:
        if k < 0:
            raise DomainError(f"阶段 {k} 不能为负")
        if k == 0 or prior is STATIONARY:
            return self.gamma_hat[mode], self.psi_hat[mode]
        prior = check_outcome_index(prior, self.gamma_bar.shape[1].bit_length() - 1)
        return self.gamma_bar[mode, prior], self.psi_bar[mode, prior]


@dataclass(frozen=True, eq=False)
class InfiniteHorizonResult:
    gamma: float
    status: SolveStatus
    iterations: int
    residual: float
    solution: Optional[FixedPointSolution] = None
    failure: Optional[StageFailure] = None

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.CONVERGED


@log_function_call
def solve_infinite_horizon(model: MjlsModel, gamma: float, tol: Optional[float] = None,
                           max_iter: Optional[int] = None,
                           settings: SolverSettings = DEFAULT_SETTINGS) -> InfiniteHorizonResult:
    """从 Ξ = W 开始反复施加阶段映射直到收敛

    Args:
        model: 问题实例
        gamma: 衰减水平
        tol: 逐元素最大变化量阈值，默认取 settings.tolerance
        max_iter: 最大迭代次数，默认取 settings.max_iterations

    Returns:
        InfiniteHorizonResult: CONVERGED 时带 FixedPointSolution
    """
    logger = get_logger()
    gamma = _check_gamma(gamma)
    tol = settings.tolerance if tol is None else float(tol)
    max_iter = settings.max_iterations if max_iter is None else int(max_iter)
    logger.info(f"无限时域迭代开始: γ={gamma:g}, tol={tol:g}, max_iter={max_iter}")

    current = StageSolution.terminal(model)
    residual = float("inf")
    for iteration in range(1, max_iter + 1):
        step = backward_step(model, gamma, current, settings=settings)
        if not step.feasible:
            failure = StageFailure(None, step.failure.mode, step.failure.prior, step.failure.reason)
            logger.info(f"无限时域迭代第 {iteration} 步不可行: {failure.reason}")
            return InfiniteHorizonResult(gamma, SolveStatus.INFEASIBLE, iteration, residual, failure=failure)
        magnitude = float(np.max(np.abs(step.xi)))
        if not np.isfinite(magnitude) or magnitude > settings.divergence_bound:
            logger.info(f"无限时域迭代第 {iteration} 步发散: ‖Ξ‖={magnitude:.3e}")
            return InfiniteHorizonResult(gamma, SolveStatus.DIVERGED, iteration, residual)
        residual = float(np.max(np.abs(step.xi - current.xi)))
        current = step
        if iteration % 100 == 0:
            logger.debug(f"迭代 {iteration}: 残差 {residual:.3e}")
        if residual < tol:
            return _finish_fixed_point(model, gamma, current, iteration, residual, settings)

    logger.info(f"无限时域迭代达到上限 {max_iter}，残差 {residual:.3e}")
    return InfiniteHorizonResult(gamma, SolveStatus.INDETERMINATE, max_iter, residual)


def _finish_fixed_point(model: MjlsModel, gamma: float, fixed: StageSolution, iterations: int, residual: float,
                        settings: SolverSettings) -> InfiniteHorizonResult:
    """在收敛的 Ξ̄ 上再做一步，取出条件增益与平稳增益"""
    conditional = backward_step(model, gamma, fixed, settings=settings)
    hat = backward_step(model, gamma, fixed, stationary=True, settings=settings)
    for stage in (conditional, hat):
        if not stage.feasible:
            return InfiniteHorizonResult(gamma, SolveStatus.INFEASIBLE, iterations, residual, failure=stage.failure)
    solution = FixedPointSolution(
        gamma=gamma,
        xi_bar=fixed.xi,
        gamma_bar=conditional.gamma_gain,
        psi_bar=conditional.psi,
        theta_bar=conditional.theta,
        lambda_bar=conditional.lam,
        xi_hat=hat.xi[:, 0],
        gamma_hat=hat.gamma_gain[:, 0],
        psi_hat=hat.psi[:, 0],
        iterations=iterations,
        residual=residual,
    )
    get_logger().info(f"无限时域迭代收敛: γ={gamma:g}, 迭代 {iterations} 次, 残差 {residual:.3e}")
    return InfiniteHorizonResult(gamma, SolveStatus.CONVERGED, iterations, residual, solution=solution)


# ---------------------------------------------------------------- 增益

GainSource = Union[FiniteHorizonSolution, FixedPointSolution]


def controller_gain(solution: GainSource, k: int, mode: int, prior: PriorLike) -> Tuple[np.ndarray, np.ndarray]:
    """返回 (Γ̃_k, Ψ̃_k)：u* = −Γ̃_k x，w* = Ψ̃_k x；第 0 阶段或平稳先验取带帽增益"""
    if isinstance(solution, InfiniteHorizonResult):
        if solution.solution is None:
            raise ConfigurationError(f"无限时域未收敛（{solution.status.value}），没有可用增益")
        solution = solution.solution
    return solution.gains(k, mode, prior)
