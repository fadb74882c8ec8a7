"""Pearson-type correlation of standardized errors and the QP initializer.

The initializer minimizes the Frobenius distance between the model
correlation and a Pearson-type target over the simplex of weights, one
quadratic program per grid beta.  Weights that land on the boundary are
pushed inside by lower-bound constraints (a boundary weight cannot be
represented by the log-ratio coordinates the optimizer uses), following
the support-similarity rule: the zeroed component is forced above a
fraction of the weight of the non-identity component whose 0/1 support is
closest in L1, or above exp(-15) when no such donor exists.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import car
from .components import ComponentError, CovariateSet, ParameterVector, assemble_correlation
from .qp import QPError, solve_qp

INTERIOR_FLOOR = np.exp(-15.0)


class EstimationError(ValueError):
    """No usable overlap in the data, or a structurally singular QP."""


@dataclass(frozen=True)
class StandardizedErrors:
    """T x d standardized errors with an observed-entry mask (True = observed)."""

    values: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.ones(values.shape, dtype=bool) if self.mask is None \
            else np.asarray(self.mask, dtype=bool)
        if mask.shape != values.shape:
            raise EstimationError("mask shape must match values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def complete(self):
        return bool(self.mask.all())


def pearson_type(errors):
    """Pairwise-complete second-moment correlation estimate, clipped to [-1, 1].

    Entry (i, j) averages eps_ti * eps_tj over the n_ij times where both are
    observed, normalized by n_ij - 1; pairs with fewer than two overlaps get
    zero.  The result is unit-diagonal but need not be positive definite --
    downstream consumers project it when they require PD.
    """
    eps = np.where(errors.mask, errors.values, 0.0)
    obs = errors.mask.astype(float)
    overlap = obs.T @ obs
    if not np.any(overlap[~np.eye(overlap.shape[0], dtype=bool)] >= 2):
        d = errors.values.shape[1]
        if d > 1:
            raise EstimationError("no variable pair has two overlapping observations")
    cross = eps.T @ eps
    with np.errstate(divide="ignore", invalid="ignore"):
        r = cross / (overlap - 1.0)
    r[overlap < 2] = 0.0
    r = np.clip(r, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return r


@dataclass(frozen=True)
class InitResult:
    theta0: ParameterVector
    objective: float  # Frobenius distance achieved
    beta_index: int = -1
    constraints_added: tuple = ()


def _gram_and_cross(mats, r_hat):
    k = len(mats)
    p = np.empty((k, k))
    h = np.empty(k)
    for i in range(k):
        h[i] = np.sum(mats[i] * r_hat)
        for j in range(i, k):
            p[i, j] = p[j, i] = np.sum(mats[i] * mats[j])
    return p, h


def _solve_weights(mats, r_hat, lower):
    """Frobenius-distance minimizing simplex weights with lower bounds."""
    p, h = _gram_and_cross(mats, r_hat)
    k = len(mats)
    # min w'Pw - 2h'w  <->  solve_qp with G = 2P, a = 2h
    C = np.column_stack([np.ones(k), np.eye(k)])
    b = np.concatenate([[1.0], lower])
    try:
        x, _, _ = solve_qp(2.0 * p, 2.0 * h, C, b, meq=1)
    except QPError as exc:
        raise EstimationError(
            "singular initialization QP (linearly dependent components); "
            "run an identifiability check") from exc
    residual = -r_hat.copy()
    for w_k, mat in zip(x, mats):
        residual += w_k * mat
    return x, float(np.sum(residual * residual))


def _support(mat):
    return np.ceil(np.abs(mat))


def qp_init(r_hat, cset, beta_grid=None):
    """Grid-search initialization theta^(0) for the likelihood optimizer.

    Solves one simplex-constrained least-squares QP per grid beta, keeps
    the first grid point attaining the minimal objective, then repairs any
    boundary weight via the support-similarity lower-bound loop until the
    returned point is strictly interior (every weight >= exp(-15)).
    """
    r_hat = np.asarray(r_hat, dtype=float)
    if r_hat.shape != (cset.d, cset.d):
        raise EstimationError("target matrix dimension mismatch")
    if np.max(np.abs(r_hat - r_hat.T)) > 1e-10 or np.max(np.abs(np.diag(r_hat) - 1)) > 1e-10:
        raise EstimationError("target matrix must be symmetric with unit diagonal")

    if cset.has_spatial:
        grid = np.asarray(beta_grid, dtype=float) if beta_grid is not None \
            else np.linspace(0.02, 0.98, 25)
        if np.any((grid <= 0) | (grid >= 1)):
            raise EstimationError("beta grid values must lie strictly in (0, 1)")
    else:
        grid = np.array([np.nan])

    n_w = cset.n_alpha + (1 if cset.has_spatial else 0)
    lower = np.zeros(n_w)
    added = []

    def run_grid():
        best = None
        for gi, beta in enumerate(grid):
            mats = [comp.value(cset.cache, beta) for comp in cset.components]
            if cset.has_spatial:
                mats.append(car.car_correlation(cset.cache, beta))
            w, value = _solve_weights(mats, r_hat, lower)
            if best is None or value < best[0] - 1e-14:
                best = (value, gi, w)
        return best

    # detection slack sits well above QP roundoff (~1e-15) but far below the
    # floor itself, so a weight pinned at its bound is never re-flagged
    floor = INTERIOR_FLOOR - 1e-13
    for _ in range(n_w + 1):
        value, gi, w = run_grid()
        low = np.where(w < floor)[0]
        if low.size == 0:
            break
        n_fix = int(low[0])
        beta_star = grid[gi]
        supports = [_support(comp.value(cset.cache, None if not cset.has_spatial else beta_star))
                    for comp in cset.components]
        if cset.has_spatial:
            supports.append(_support(car.car_correlation(cset.cache, beta_star)))
        # donor: nearest support among non-identity components other than n_fix
        donors = [k for k in range(1, n_w) if k != n_fix]
        bound = INTERIOR_FLOOR
        if donors:
            dists = [np.sum(np.abs(supports[k] - supports[n_fix])) for k in donors]
            q = donors[int(np.argmin(dists))]
            bound = max(w[q] / (cset.n_alpha + 1), INTERIOR_FLOOR)
        if lower[n_fix] > 0:
            raise EstimationError("initialization failed to move off the boundary")
        lower[n_fix] = bound
        added.append((n_fix, float(bound)))
    else:
        raise EstimationError("initialization boundary repair did not terminate")

    if cset.has_spatial:
        theta = ParameterVector(np.array(w[:-1]), float(w[-1]), float(grid[gi]))
    else:
        theta = ParameterVector(np.array(w))
    return InitResult(theta0=theta, objective=float(np.sqrt(value)),
                      beta_index=int(gi) if cset.has_spatial else -1,
                      constraints_added=tuple(added))


def ive(theta0, cset):
    """Initial-value estimator: the correlation assembled from theta^(0)."""
    return assemble_correlation(theta0, cset)
