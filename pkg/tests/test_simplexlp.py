import numpy as np
import pytest
from scipy.optimize import linprog

from structcov.simplexlp import LPError, reduce_rows, solve_lp


def test_reduce_rows_drops_duplicates():
    A = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    b = np.array([1.0, 1.0, 2.0, 1.0])
    A2, b2 = reduce_rows(A, b)
    assert A2.shape[0] == 2
    # same solution set
    x = np.linalg.lstsq(A2, b2, rcond=None)[0]
    assert np.allclose(A @ x, b, atol=1e-9)


def test_reduce_rows_rank_compression():
    rng = np.random.default_rng(0)
    base = rng.standard_normal((3, 5))
    mix = rng.standard_normal((40, 3))
    A = mix @ base
    x_true = rng.random(5)
    b = A @ x_true
    A2, b2 = reduce_rows(A, b)
    assert A2.shape[0] == 3
    assert np.allclose(A2 @ x_true, b2, atol=1e-9)


def test_reduce_rows_inconsistent():
    with pytest.raises(LPError):
        reduce_rows(np.zeros((1, 2)), np.array([1.0]))


def test_basic_lp():
    # max x + y s.t. x + y + s = 1 -> 1.0
    c = np.array([1.0, 1.0, 0.0])
    A = np.array([[1.0, 1.0, 1.0]])
    b = np.array([1.0])
    val, x = solve_lp(c, A, b)
    assert val == pytest.approx(1.0, abs=1e-12)


def test_degenerate_zero_objective():
    c = np.array([0.0, 0.0])
    A = np.array([[1.0, 1.0]])
    b = np.array([1.0])
    val, x = solve_lp(c, A, b)
    assert val == 0.0
    assert abs(x.sum() - 1.0) < 1e-12


def test_unbounded_detected():
    c = np.array([1.0, 0.0])
    A = np.array([[0.0, 1.0]])
    b = np.array([1.0])
    with pytest.raises(LPError):
        solve_lp(c, A, b)


def test_matches_scipy_on_random_instances():
    rng = np.random.default_rng(42)
    solved = 0
    for _ in range(120):
        n = int(rng.integers(2, 10))
        m = int(rng.integers(1, n + 1))
        A = rng.standard_normal((m, n))
        x_feas = rng.random(n)
        b = A @ x_feas
        c = rng.standard_normal(n)
        ref = linprog(-c, A_eq=A, b_eq=b, bounds=[(0, None)] * n, method="highs")
        if not ref.success:  # scipy flags unbounded/infeasible
            with pytest.raises(LPError):
                solve_lp(c, A, b)
            continue
        val, x = solve_lp(c, A, b)
        assert val == pytest.approx(-ref.fun, abs=1e-7)
        assert np.all(x >= -1e-9)
        assert np.allclose(A @ x, b, atol=1e-7)
        solved += 1
    assert solved > 50


def test_redundant_rows_with_noise_free_duplicates():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((4, 6))
    A = np.vstack([A, A, A[::-1]])
    x_feas = rng.random(6)
    b = A @ x_feas
    c = rng.standard_normal(6)
    ref = linprog(-c, A_eq=A, b_eq=b, bounds=[(0, None)] * 6, method="highs")
    if ref.success:
        val, _ = solve_lp(c, A, b)
        assert val == pytest.approx(-ref.fun, abs=1e-7)
