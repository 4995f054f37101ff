#!/usr/bin/env python3
# 矩阵工具测试

import numpy as np

from matrix_utils import (is_positive_definite, is_positive_semidefinite, is_symmetric, min_eigenvalue,
                          solve_general, solve_positive_definite, symmetrize)


def test_symmetrize_batch():
    batch = np.array([[[1.0, 2.0], [0.0, 1.0]], [[0.0, 4.0], [2.0, 0.0]]])
    result = symmetrize(batch)
    assert np.allclose(result[0], [[1.0, 1.0], [1.0, 1.0]])
    assert np.allclose(result[1], [[0.0, 3.0], [3.0, 0.0]])


def test_positive_definite_threshold():
    assert is_positive_definite(np.eye(3))
    assert not is_positive_definite(np.diag([1.0, 0.0]))
    assert not is_positive_definite(np.diag([1.0, -1e-3]))
    # 相对阈值：与范数相比过小的特征值视为奇异
    assert not is_positive_definite(np.diag([1e6, 1e-8]))


def test_positive_definite_rejects_non_finite():
    assert not is_positive_definite(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    assert not is_positive_semidefinite(np.array([[np.inf]]))


def test_semidefinite_accepts_zero():
    assert is_positive_semidefinite(np.zeros((2, 2)))
    assert is_positive_semidefinite(np.ones((3, 3)))
    assert not is_positive_semidefinite(np.diag([1.0, -0.1]))


def test_min_eigenvalue_and_symmetry():
    assert np.isclose(min_eigenvalue(np.diag([3.0, -2.0, 5.0])), -2.0)
    assert min_eigenvalue(np.zeros((0, 0))) == np.inf
    assert is_symmetric(np.ones((2, 2)))
    assert not is_symmetric(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_solve_positive_definite():
    matrix = np.array([[4.0, 1.0], [1.0, 3.0]])
    rhs = np.array([[1.0], [2.0]])
    outcome = solve_positive_definite(matrix, rhs)
    assert outcome.ok
    assert np.allclose(matrix @ outcome.solution, rhs)

    failed = solve_positive_definite(np.diag([1.0, -1.0]), rhs)
    assert not failed.ok
    assert failed.reason


def test_solve_general_condition_limit():
    matrix = np.array([[2.0, 1.0], [1.0, -1.0]])
    rhs = np.array([3.0, 0.0])
    outcome = solve_general(matrix, rhs)
    assert outcome.ok
    assert np.allclose(outcome.solution, [1.0, 1.0])

    singular = solve_general(np.array([[1.0, 2.0], [2.0, 4.0]]), rhs)
    assert not singular.ok
    assert "条件数" in singular.reason
