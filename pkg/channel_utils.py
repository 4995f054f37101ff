#!/usr/bin/env python3
# 信道结果组合模块 - 结果索引、执行器掩码、条件/平稳结果分布与期望算子
#
# 结果索引 j 的第 h-1 位（最低位对应信道 1）为 1 表示信道 h 本步送达。

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, FrozenSet, Mapping, Sequence, Tuple, Union

import numpy as np

from constants import EXACT_ZERO_TOL
from error_utils import DomainError
from model_utils import ChannelBank, GilbertElliottChannel


class Prior(Enum):
    """结果分布的条件类型；整数先验索引之外的唯一取值"""

    STATIONARY = "stationary"


STATIONARY = Prior.STATIONARY

PriorLike = Union[int, Prior]


def check_outcome_index(j: int, m: int) -> int:
    if isinstance(j, (bool, np.bool_)) or not isinstance(j, (int, np.integer)):
        raise DomainError(f"结果索引必须是整数，实际为 {j!r}")
    if not 0 <= j < 2 ** m:
        raise DomainError(f"结果索引 {j} 超出 [0, {2 ** m - 1}]")
    return int(j)


@lru_cache(maxsize=None)
def outcome_bits(m: int) -> np.ndarray:
    """(2^m, m) 的 0/1 表，第 l 行第 h-1 列为信道 h 在结果 l 中是否送达"""
    bits = (np.arange(2 ** m)[:, None] >> np.arange(m)[None, :]) & 1
    bits = bits.astype(bool)
    bits.setflags(write=False)
    return bits


@lru_cache(maxsize=None)
def outcome_masks(m: int) -> np.ndarray:
    """全部结果的对角掩码 𝒩(l)，形状 (2^m, m, m)"""
    bits = outcome_bits(m).astype(float)
    masks = np.zeros((2 ** m, m, m))
    masks[:, np.arange(m), np.arange(m)] = bits
    masks.setflags(write=False)
    return masks


def index_set_and_mask(j: int, m: int) -> Tuple[FrozenSet[int], np.ndarray]:
    """结果 j 的送达信道集合 ℐ_j（信道编号 1 起）与掩码 𝒩(j)"""
    j = check_outcome_index(j, m)
    members = frozenset(h + 1 for h in range(m) if (j >> h) & 1)
    return members, outcome_masks(m)[j].copy()


def stationary_success(channel: GilbertElliottChannel) -> float:
    """平稳送达概率 μ̄/(1 + μ̄ - v̄)"""
    return float(stationary_success_vector(ChannelBank((channel,)))[0])


def stationary_success_vector(bank: ChannelBank) -> np.ndarray:
    """各信道平稳送达概率

    Raises:
        DomainError: v̄ = 1 且 μ̄ = 0 的信道两个状态都吸收，平稳分布不唯一
    """
    denominator = 1.0 + bank.recover - bank.stay_good
    if np.any(denominator <= 0.0):
        channels = [int(h) + 1 for h in np.flatnonzero(denominator <= 0.0)]
        raise DomainError(f"信道 {channels} 的 v̄ = 1 且 μ̄ = 0，平稳送达概率无定义")
    return bank.recover / denominator


def conditional_success_vector(bank: ChannelBank, prior: PriorLike) -> np.ndarray:
    """各信道本步送达概率：先验为 j 时上一步送达的信道取 v̄，否则取 μ̄"""
    if prior is STATIONARY:
        return stationary_success_vector(bank)
    j = check_outcome_index(prior, bank.m)
    previous = outcome_bits(bank.m)[j]
    return np.where(previous, bank.stay_good, bank.recover)


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """2^m 个结果上的概率向量"""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0 or probs.size & (probs.size - 1):
            raise DomainError(f"结果分布长度必须是 2 的幂，实际为 {probs.shape}")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0.0) or abs(probs.sum() - 1.0) > EXACT_ZERO_TOL:
            raise DomainError(f"结果分布必须非负且和为 1（当前和 {probs.sum():.15g}）")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def m(self) -> int:
        return self.probs.size.bit_length() - 1

    def marginals(self) -> np.ndarray:
        """各信道的边缘送达概率"""
        return self.probs @ outcome_bits(self.m)

    @classmethod
    def point_mass(cls, l: int, m: int) -> "OutcomeDistribution":
        probs = np.zeros(2 ** m)
        probs[check_outcome_index(l, m)] = 1.0
        return cls(probs)


def product_distribution(success: np.ndarray) -> OutcomeDistribution:
    """独立信道送达概率的乘积分布"""
    success = np.asarray(success, dtype=float)
    bits = outcome_bits(success.size)
    probs = np.prod(np.where(bits, success[None, :], 1.0 - success[None, :]), axis=1)
    # 乘积的舍入误差在 1e-16 量级，归一化保持和为 1
    return OutcomeDistribution(probs / probs.sum())


def outcome_distribution(bank: ChannelBank, prior: PriorLike) -> OutcomeDistribution:
    """先验结果为 j（或平稳）时本步各结果的概率 𝒫^j(l) / 𝒫̂(l)"""
    return product_distribution(conditional_success_vector(bank, prior))


def all_conditional_distributions(bank: ChannelBank) -> np.ndarray:
    """所有先验 j 的 𝒫^j，形状 (2^m, 2^m)，行为先验"""
    return np.stack([outcome_distribution(bank, j).probs for j in range(2 ** bank.m)])


MatrixFamily = Union[np.ndarray, Sequence[np.ndarray], Mapping[int, np.ndarray], Callable[[int], np.ndarray]]


def _collect(dist: OutcomeDistribution, family: MatrixFamily) -> np.ndarray:
    count = dist.probs.size
    if isinstance(family, np.ndarray):
        values = family
    elif callable(family):
        values = [np.asarray(family(l), dtype=float) for l in range(count)]
    elif isinstance(family, Mapping):
        values = [np.asarray(family[l], dtype=float) for l in range(count)]
    else:
        values = [np.asarray(y, dtype=float) for y in family]
    if not isinstance(values, np.ndarray):
        shapes = {v.shape for v in values}
        if len(shapes) > 1:
            raise DomainError(f"期望算子要求所有矩阵形状一致，实际 {sorted(shapes)}")
        values = np.stack(values)
    if values.shape[0] != count:
        raise DomainError(f"矩阵族长度 {values.shape[0]} 与结果数 {count} 不一致")
    return values


def expect_over_outcomes(dist: OutcomeDistribution, family: MatrixFamily) -> np.ndarray:
    """Σ_l P(l)·Y(l)

    Args:
        dist: 结果分布
        family: 以结果索引为下标的矩阵族（堆叠数组、序列、字典或函数）

    Returns:
        np.ndarray: 加权和
    """
    values = _collect(dist, family)
    return np.tensordot(dist.probs, values, axes=1)


def transition_step(bank: ChannelBank, success_probs: np.ndarray) -> np.ndarray:
    """把各信道的送达边缘概率推进一步 Gilbert-Elliott 转移"""
    success_probs = np.asarray(success_probs, dtype=float)
    if success_probs.shape != (bank.m,):
        raise DomainError(f"边缘概率长度应为 {bank.m}，实际为 {success_probs.shape}")
    return success_probs * bank.stay_good + (1.0 - success_probs) * bank.recover
