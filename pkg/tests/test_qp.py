import itertools

import numpy as np
import pytest

from structcov.qp import QPError, solve_qp


def brute_force_qp(G, a, C, b, meq):
    """Oracle: enumerate active sets, solve the KKT system, check KKT conditions."""
    n = a.size
    m = C.shape[1]
    ineq = list(range(meq, m))
    best = None
    for r in range(len(ineq) + 1):
        for extra in itertools.combinations(ineq, r):
            act = list(range(meq)) + list(extra)
            N = C[:, act]
            kkt = np.block([[G, -N], [-N.T, np.zeros((len(act), len(act)))]])
            rhs = np.concatenate([a, -b[act]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            x, lam = sol[:n], sol[n:]
            if np.any(C.T @ x - b < -1e-9):
                continue
            if np.any(lam[meq:] < -1e-9):
                continue
            val = 0.5 * x @ G @ x - a @ x
            if best is None or val < best[0] - 1e-12:
                best = (val, x)
    return best


def test_unconstrained_minimum():
    G = np.diag([2.0, 4.0])
    a = np.array([2.0, 4.0])
    x, active, _ = solve_qp(G, a)
    assert np.allclose(x, [1.0, 1.0])
    assert active == []


def test_simple_bound_activation():
    # min (x-1)^2 with x >= 2  ->  x = 2
    G = np.array([[2.0]])
    a = np.array([2.0])
    C = np.array([[1.0]])
    b = np.array([2.0])
    x, active, lag = solve_qp(G, a, C, b)
    assert np.allclose(x, [2.0])
    assert active == [0]
    assert lag[0] >= 0


def test_equality_simplex():
    # min ||x||^2 on the simplex -> uniform weights
    n = 4
    G = 2.0 * np.eye(n)
    a = np.zeros(n)
    C = np.column_stack([np.ones(n), np.eye(n)])
    b = np.concatenate([[1.0], np.zeros(n)])
    x, _, _ = solve_qp(G, a, C, b, meq=1)
    assert np.allclose(x, np.full(n, 0.25), atol=1e-12)


def test_rejects_indefinite():
    with pytest.raises(QPError):
        solve_qp(np.array([[0.0]]), np.array([1.0]))


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(99)
    for trial in range(60):
        n = int(rng.integers(2, 6))
        root = rng.standard_normal((n, n))
        G = root @ root.T + n * np.eye(n)
        a = rng.standard_normal(n)
        # simplex equality plus lower bounds -> always feasible
        lower = rng.uniform(0.0, 0.5 / n, size=n)
        C = np.column_stack([np.ones(n), np.eye(n)])
        b = np.concatenate([[1.0], lower])
        x, _, _ = solve_qp(G, a, C, b, meq=1)
        want = brute_force_qp(G, a, C, b, meq=1)
        assert want is not None
        got_val = 0.5 * x @ G @ x - a @ x
        assert got_val == pytest.approx(want[0], abs=1e-8)
        assert np.allclose(x, want[1], atol=1e-7)
        assert abs(x.sum() - 1.0) < 1e-10
        assert np.all(x >= lower - 1e-10)


def test_inequality_only_matches_oracle():
    rng = np.random.default_rng(7)
    for _ in range(40):
        n = int(rng.integers(1, 5))
        root = rng.standard_normal((n, n))
        G = root @ root.T + n * np.eye(n)
        a = rng.standard_normal(n)
        m = int(rng.integers(1, 4))
        C = rng.standard_normal((n, m))
        b = C.T @ rng.standard_normal(n) - rng.uniform(0, 1, size=m)  # feasible
        x, _, _ = solve_qp(G, a, C, b)
        want = brute_force_qp(G, a, C, b, meq=0)
        got_val = 0.5 * x @ G @ x - a @ x
        assert got_val == pytest.approx(want[0], abs=1e-7)
