#!/usr/bin/env python3
# 可复现随机子流测试

import numpy as np

from rng_utils import TrialRNG, bernoulli, inverse_cdf


def test_same_seed_and_trial_reproduce():
    first = TrialRNG(42, 3).uniforms(10)
    second = TrialRNG(42, 3).uniforms(10)
    assert np.array_equal(first, second)


def test_trials_are_independent_streams():
    base = TrialRNG(42, 0)
    assert not np.array_equal(base.uniforms(5), TrialRNG(42, 1).uniforms(5))
    assert not np.array_equal(TrialRNG(42, 0).uniforms(5), TrialRNG(43, 0).uniforms(5))


def test_fork_matches_direct_construction():
    forked = TrialRNG(7, 0).fork(5)
    assert forked.seed == 7 and forked.trial == 5
    assert np.array_equal(forked.uniforms(4), TrialRNG(7, 5).uniforms(4))


def test_inverse_cdf_fixed_order():
    probs = np.array([0.45, 0.55])
    assert inverse_cdf(probs, 0.0) == 0
    assert inverse_cdf(probs, 0.449) == 0
    assert inverse_cdf(probs, 0.45) == 1
    assert inverse_cdf(probs, 0.9999999) == 1


def test_inverse_cdf_skips_zero_tail():
    probs = np.array([0.3, 0.7 - 1e-17, 0.0])
    assert inverse_cdf(probs, 0.99999999999999999) == 1


def test_bernoulli_threshold():
    assert bernoulli(0.8, 0.79)
    assert not bernoulli(0.8, 0.8)
    assert not bernoulli(0.0, 0.0)
    assert bernoulli(1.0, 0.999999)
