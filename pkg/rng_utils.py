#!/usr/bin/env python3
# 可复现随机数模块 - 按 (种子, 试验编号) 派生独立子流

import numpy as np


class TrialRNG:
    """单次试验的随机数子流，试验 t 的抽样与总试验数和并行方式无关"""

    def __init__(self, seed: int, trial: int = 0):
        self._seed = int(seed)
        self._trial = int(trial)
        self._rng = np.random.default_rng(np.random.SeedSequence([self._seed, self._trial]))

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def trial(self) -> int:
        return self._trial

    def uniforms(self, count: int) -> np.ndarray:
        return self._rng.random(count)

    def fork(self, trial: int) -> "TrialRNG":
        """同一种子下另一个试验的子流"""
        return TrialRNG(self._seed, trial)


def inverse_cdf(probs: np.ndarray, u: float) -> int:
    """按固定下标顺序的累积分布取样：返回第一个累积概率超过 u 的下标"""
    cumulative = np.cumsum(probs)
    index = int(np.searchsorted(cumulative, u, side="right"))
    # 舍入使累积和略小于 1 时落到最后一个正概率下标
    if index >= len(probs):
        index = int(np.flatnonzero(np.asarray(probs) > 0.0)[-1])
    return index


def bernoulli(probability: float, u: float) -> bool:
    """u < p 视为成功"""
    return bool(u < probability)
