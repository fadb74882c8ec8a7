"""Dense two-phase simplex for small equality-form linear programs.

Solves  max c^T x  subject to  A x = b,  x >= 0.

The identifiability check produces one equality row per matrix entry, the
bulk of which are duplicates (cluster matrices repeat a handful of entry
patterns) or linear combinations of a few independent rows.  ``reduce_rows``
therefore first drops duplicate rows and then compresses the system to a
row-space basis via an SVD; the solution set is unchanged because both
operations act by invertible row transformations.  After reduction the
tableau has at most n+1 rows for n variables, so a plain dense tableau
with Bland's anti-cycling rule is entirely adequate.
"""

from __future__ import annotations

import numpy as np


class LPError(RuntimeError):
    """Solver failure (cycling guard or unboundedness); never 'infeasible by rounding'."""


def reduce_rows(A, b, tol=1e-11):
    """Equivalent system with duplicate rows removed and rank-reduced rows.

    Raises LPError if the system is provably inconsistent (a nonzero right
    hand side over a zero row), which cannot happen for the identifiability
    program but guards against malformed input.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    stacked = np.column_stack([A, b])
    stacked = np.unique(np.round(stacked, 12), axis=0)
    # drop all-zero rows
    nz = np.any(stacked != 0.0, axis=1)
    stacked = stacked[nz]
    if stacked.shape[0] == 0:
        return np.zeros((0, A.shape[1])), np.zeros(0)
    # inconsistent zero-coefficient rows
    zero_coef = ~np.any(stacked[:, :-1], axis=1)
    if np.any(zero_coef):
        raise LPError("inconsistent equality system")
    u, s, vt = np.linalg.svd(stacked, full_matrices=False)
    rank = int(np.sum(s > s[0] * tol)) if s.size else 0
    basis = s[:rank, None] * vt[:rank]
    return basis[:, :-1], basis[:, -1]


def _pivot(T, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _simplex(T, basis, n, tol):
    """Bland-rule simplex on tableau T (objective in last row, rhs last column)."""
    m = len(basis)
    for _ in range(20000):
        cost = T[-1, :n]
        enter = -1
        for j in range(n):
            if cost[j] < -tol:
                enter = j
                break
        if enter < 0:
            return
        ratios = np.full(m, np.inf)
        col = T[:m, enter]
        rhs = T[:m, -1]
        pos = col > tol
        ratios[pos] = rhs[pos] / col[pos]
        if not np.any(pos):
            raise LPError("linear program is unbounded")
        best = np.min(ratios)
        # Bland tie-break: smallest basis index among minimal ratios
        cand = [r for r in range(m) if pos[r] and ratios[r] <= best + tol]
        leave = min(cand, key=lambda r: basis[r])
        _pivot(T, leave, enter)
        basis[leave] = enter
    raise LPError("simplex iteration limit reached")


def solve_lp(c, A, b, tol=1e-9):
    """Maximize c^T x s.t. Ax = b, x >= 0; returns (optimum, x).

    The caller guarantees feasibility; a phase-1 residual above tolerance is
    reported as an LPError rather than misread as an answer.
    """
    c = np.asarray(c, dtype=float)
    A, b = reduce_rows(A, b)
    n = c.size
    m = A.shape[0]
    if m == 0:
        # only x >= 0 remains; bounded iff c <= 0
        if np.any(c > tol):
            raise LPError("linear program is unbounded")
        return 0.0, np.zeros(n)
    # make rhs nonnegative for the artificial start
    flip = b < 0
    A = A.copy()
    A[flip] *= -1.0
    b = np.abs(b)

    # phase 1: minimize sum of artificials
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(n, n + m))
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    _simplex(T, basis, n + m, tol)
    if T[-1, -1] < -1e-7:
        raise LPError("phase-1 residual %.3e: no feasible point found" % -T[-1, -1])
    # drive remaining artificials out of the basis where possible
    for r in range(m):
        if basis[r] >= n:
            pivot_col = next((j for j in range(n) if abs(T[r, j]) > tol), None)
            if pivot_col is not None:
                _pivot(T, r, pivot_col)
                basis[r] = pivot_col
    keep = [r for r in range(m) if basis[r] < n or abs(T[r, -1]) > tol]
    if any(basis[r] >= n and abs(T[r, -1]) > tol for r in range(m)):
        raise LPError("artificial variable stuck in basis")  # pragma: no cover

    # phase 2 tableau without artificial columns
    T2 = np.zeros((len(keep) + 1, n + 1))
    for i, r in enumerate(keep):
        T2[i, :n] = T[r, :n]
        T2[i, -1] = T[r, -1]
    basis2 = [basis[r] for r in keep]
    T2[-1, :n] = -c
    for i, bv in enumerate(basis2):
        if T2[-1, bv] != 0.0:
            T2[-1] -= T2[-1, bv] * T2[i]
    _simplex(T2, basis2, n, tol)
    x = np.zeros(n)
    for i, bv in enumerate(basis2):
        x[bv] = T2[i, -1]
    return float(c @ x), x
