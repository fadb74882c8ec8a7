"""Model identifiability check via a linear program over a beta grid.

Two distinct parameter vectors produce the same correlation matrix exactly
when either the component matrices are linearly dependent at some beta, or
for some pair beta != beta' the linear program

    max  delta + delta'
    s.t. sum_k alpha_k F_k(beta) - sum_k alpha'_k F_k(beta')
             + delta Gamma(beta)^-1 - delta' Gamma(beta')^-1 = 0
         sum alpha + delta = sum alpha' + delta' = 1,  all variables >= 0

has a strictly positive optimum.  For a roster of static components F_k
this is exactly the textbook pair program; components that interact with
the spatial effect are evaluated at their own side's beta.  A vanishing
optimum on every scanned grid pair together with full-rank stacked
components is evidence of identifiability (the grid makes this a check,
not a proof).  Without a spatial effect only the rank condition applies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import car
from .simplexlp import solve_lp

DEFAULT_GRID = np.linspace(0.02, 0.98, 25)
DEFAULT_TOL = 1e-7


@dataclass(frozen=True)
class Witness:
    """Feasible point with delta + delta' above tolerance (non-identifiability)."""

    beta: float
    beta_prime: float
    alpha: np.ndarray
    alpha_prime: np.ndarray
    delta: float
    delta_prime: float
    objective: float

    def residual(self, cset):
        """sum alpha F(beta) - sum alpha' F(beta') + delta G(b) - delta' G(b'); ~0 when valid."""
        res = np.zeros((cset.d, cset.d))
        for a_k, comp in zip(self.alpha, cset.components):
            res += a_k * comp.value(cset.cache, self.beta)
        for a_k, comp in zip(self.alpha_prime, cset.components):
            res -= a_k * comp.value(cset.cache, self.beta_prime)
        res += self.delta * car.car_correlation(cset.cache, self.beta)
        res -= self.delta_prime * car.car_correlation(cset.cache, self.beta_prime)
        return res


@dataclass(frozen=True)
class IdentifiabilityReport:
    identifiable: bool
    witnesses: tuple[Witness, ...]
    independence_ok: bool
    grid: np.ndarray
    lp_max: float = 0.0
    dependent_betas: tuple[float, ...] = ()

    def to_dict(self):
        return {
            "identifiable": self.identifiable,
            "independence_ok": self.independence_ok,
            "grid": list(map(float, self.grid)),
            "lp_max": self.lp_max,
            "dependent_betas": list(self.dependent_betas),
            "witnesses": [
                {
                    "beta": w.beta,
                    "beta_prime": w.beta_prime,
                    "alpha": list(map(float, w.alpha)),
                    "alpha_prime": list(map(float, w.alpha_prime)),
                    "delta": w.delta,
                    "delta_prime": w.delta_prime,
                    "objective": w.objective,
                }
                for w in self.witnesses
            ],
        }


def _component_columns(cset, beta, iu):
    """Upper-triangle vectorizations of every alpha component at this beta."""
    return np.column_stack([comp.value(cset.cache, beta)[iu] for comp in cset.components])


def _full_rank(stack):
    s = np.linalg.svd(stack, compute_uv=False)
    rank = int(np.sum(s > s[0] * 1e-10)) if s.size else 0
    return rank == stack.shape[1]


def _pair_lp(cols_b, cols_bp, gamma_b, gamma_bp):
    """Solve the pair LP; returns (value, alpha, alpha', delta, delta')."""
    n_pairs, k1 = cols_b.shape
    n = 2 * k1 + 2
    A = np.zeros((n_pairs + 2, n))
    A[:n_pairs, :k1] = cols_b
    A[:n_pairs, k1:2 * k1] = -cols_bp
    A[:n_pairs, 2 * k1] = gamma_b
    A[:n_pairs, 2 * k1 + 1] = -gamma_bp
    rhs = np.zeros(n_pairs + 2)
    A[n_pairs, :k1] = 1.0
    A[n_pairs, 2 * k1] = 1.0
    rhs[n_pairs] = 1.0
    A[n_pairs + 1, k1:2 * k1] = 1.0
    A[n_pairs + 1, 2 * k1 + 1] = 1.0
    rhs[n_pairs + 1] = 1.0
    c = np.zeros(n)
    c[2 * k1] = c[2 * k1 + 1] = 1.0
    value, x = solve_lp(c, A, rhs)
    return value, x[:k1], x[k1:2 * k1], x[2 * k1], x[2 * k1 + 1]


def check_identifiability(cset, beta_grid=None, tol=DEFAULT_TOL):
    """Scan the grid; any pair-LP optimum above ``tol`` yields a witness.

    Solver failures surface as LPError -- they are never reported as
    "identifiable".  The LP is symmetric under swapping (beta, beta'), so
    unordered grid pairs cover every ordered pair.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    iu = np.triu_indices(cset.d)

    if not cset.has_spatial:
        cols = _component_columns(cset, None, iu)
        independence_ok = _full_rank(cols)
        return IdentifiabilityReport(
            identifiable=independence_ok, witnesses=(),
            independence_ok=independence_ok, grid=np.zeros(0))

    grid = DEFAULT_GRID if beta_grid is None else np.asarray(beta_grid, dtype=float)
    if np.any((grid <= 0) | (grid >= 1)):
        raise ValueError("grid values must lie strictly in (0, 1)")
    grid = np.sort(np.unique(grid))

    gamma_vecs = {}
    cols_at = {}
    independence_ok = True
    dependent = []
    for b in grid:
        gamma_vecs[b] = car.car_correlation(cset.cache, b)[iu]
        cols_at[b] = _component_columns(cset, b, iu)
        if not _full_rank(np.column_stack([cols_at[b], gamma_vecs[b]])):
            independence_ok = False
            dependent.append(float(b))

    witnesses = []
    lp_max = 0.0
    for i, b in enumerate(grid):
        for bp in grid[i + 1:]:
            value, al, alp, de, dep = _pair_lp(cols_at[b], cols_at[bp],
                                               gamma_vecs[b], gamma_vecs[bp])
            lp_max = max(lp_max, value)
            if value > tol:
                witnesses.append(Witness(float(b), float(bp), al, alp,
                                         float(de), float(dep), float(value)))
    witnesses.sort(key=lambda w: (w.beta, w.beta_prime))
    identifiable = independence_ok and not witnesses
    return IdentifiabilityReport(
        identifiable=identifiable, witnesses=tuple(witnesses),
        independence_ok=independence_ok, grid=grid, lp_max=float(lp_max),
        dependent_betas=tuple(dependent))
