"""Dense dual active-set quadratic programming for small strictly convex QPs.

Solves  min 1/2 x^T G x - a^T x  subject to  C[:, :meq]^T x  = b[:meq],
                                             C[:, meq:]^T x >= b[meq:],
in the Goldfarb-Idnani fashion: start at the unconstrained minimum, add the
most violated constraint, and take mixed primal/dual steps until primal
feasible with nonnegative multipliers.  The problems solved here have at
most a dozen variables, so the reduced operators are recomputed from
scratch each iteration instead of being rank-one updated -- simpler and
exact at this scale.
"""

from __future__ import annotations

import numpy as np


class QPError(RuntimeError):
    """Raised when G is not positive definite or no feasible point exists."""


def solve_qp(G, a, C=None, b=None, meq=0, tol=1e-11, max_iter=500):
    """Return (x, active, lagrange) for the QP described in the module docstring.

    C has one column per constraint (normal vectors); the first ``meq``
    columns are equalities, satisfied exactly once entered and never
    dropped.  ``active`` lists indices of constraints active at the
    solution, ``lagrange`` their multipliers (equality multipliers are
    sign-free and refer to the working normal orientation).
    """
    G = np.asarray(G, dtype=float)
    a = np.asarray(a, dtype=float)
    n = a.size
    try:
        chol = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise QPError("quadratic form is not positive definite")
    eye = np.eye(n)
    g_inv = np.linalg.solve(chol.T, np.linalg.solve(chol, eye))

    x = g_inv @ a
    if C is None or C.size == 0:
        return x, [], np.zeros(0)
    C = np.asarray(C, dtype=float)
    b = np.asarray(b, dtype=float)
    m = C.shape[1]
    sign = np.ones(m)  # equalities may be entered with a flipped normal

    active: list[int] = []
    u = np.zeros(0)

    def reduced_ops():
        # N* = (N^T G^-1 N)^-1 N^T G^-1 and H = G^-1 (I - N N*)
        if not active:
            return None, g_inv
        N = C[:, active] * sign[active]
        gn = g_inv @ N
        nstar = np.linalg.solve(N.T @ gn, gn.T)
        return nstar, g_inv - gn @ nstar

    for _ in range(max_iter):
        slack = C.T @ x - b
        score = slack.copy()
        score[meq:] = np.minimum(score[meq:], 0.0)
        score[:meq] = -np.abs(score[:meq])
        if active:
            score[active] = 0.0
        p = int(np.argmin(score))
        if score[p] >= -tol:
            return x, list(active), u.copy()

        sign[p] = -1.0 if (p < meq and slack[p] > 0) else 1.0
        npv = sign[p] * C[:, p]
        sp = sign[p] * slack[p]  # negative by construction
        u_p = 0.0

        while True:
            nstar, H = reduced_ops()
            z = H @ npv
            r = nstar @ npv if nstar is not None else np.zeros(0)

            # dual step bound: active inequality multipliers stay nonnegative
            t1, blocking = np.inf, -1
            for idx, k in enumerate(active):
                if k >= meq and r[idx] > tol:
                    ratio = u[idx] / r[idx]
                    if ratio < t1:
                        t1, blocking = ratio, idx
            ztn = z @ npv
            t2 = -sp / ztn if ztn > tol else np.inf
            t = min(t1, t2)
            if not np.isfinite(t):
                raise QPError("constraints are infeasible")

            x = x + t * z
            if len(active):
                u = u - t * r
            u_p += t
            sp = sp + t * ztn
            if t2 <= t1:
                active.append(p)
                u = np.append(u, u_p)
                break
            del active[blocking]
            u = np.delete(u, blocking)

    raise QPError("dual active-set iteration limit reached")
