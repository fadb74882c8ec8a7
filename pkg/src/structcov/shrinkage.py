"""Optimal shrinkage between the structured and Pearson-type estimators.

The weighted estimator is (1 - lambda) R_sce + lambda R_pearson with
lambda chosen to minimize the expected squared Frobenius error.  The
closed-form upper-bound estimate is

    lambda_U = 1 - (1/T) (pi - rho_U) / gamma,

built from the Pearson variance kernel pi, the Cauchy-Schwarz bound rho_U
on the cross-covariance (delta-method variances of the structured fit),
and the squared discrepancy gamma; values are clamped to [0, 1].  The
parametric bootstrap replaces all three with empirical moments over
replicates simulated from the PD-projected Pearson matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .components import assemble_correlation
from .initialization import StandardizedErrors, pearson_type
from .likelihood import fisher_information, fit_sce, free_derivative_matrices
from .rng import substream

EIG_FLOOR = 1e-8


class ShrinkageError(RuntimeError):
    """Degenerate inputs (projection failure) in the shrinkage path."""


@dataclass(frozen=True)
class ShrinkageEstimate:
    lam: float
    pi_hat: float
    rho_hat: float
    gamma_hat: float
    method: str  # closed_form_upper | bootstrap
    clamped: bool


def nearest_pd_correlation(m, eig_floor=EIG_FLOOR, tol=1e-9, max_sweeps=1000):
    """Alternating projections onto {unit diagonal} and {eigenvalues >= floor}.

    Dykstra's correction is applied on the spectral projection so the
    iteration converges to the nearest correlation matrix in Frobenius
    norm.  Already-valid input is returned unchanged.
    """
    m = np.asarray(m, dtype=float)
    if np.max(np.abs(m - m.T)) > 1e-10:
        raise ShrinkageError("projection input must be symmetric")
    m = 0.5 * (m + m.T)
    if np.max(np.abs(np.diag(m) - 1.0)) <= 1e-12 and np.linalg.eigvalsh(m)[0] >= eig_floor:
        return m
    y = m.copy()
    ds = np.zeros_like(m)
    prev = y
    for _ in range(max_sweeps):
        r = y - ds
        eigval, eigvec = np.linalg.eigh(r)
        x = (eigvec * np.maximum(eigval, eig_floor)) @ eigvec.T
        ds = x - r
        y = x.copy()
        np.fill_diagonal(y, 1.0)
        if np.linalg.norm(y - prev, "fro") < tol:
            break
        prev = y.copy()
    out = 0.5 * (y + y.T)
    np.fill_diagonal(out, 1.0)
    if np.linalg.eigvalsh(out)[0] < eig_floor:
        # final fix-up: clamp the spectrum above the floor, then rescale to a
        # unit diagonal (a congruence, so definiteness is preserved)
        eigval, eigvec = np.linalg.eigh(out)
        out = (eigvec * np.maximum(eigval, 1.5 * eig_floor)) @ eigvec.T
        s = 1.0 / np.sqrt(np.diag(out))
        out = out * s[:, None] * s[None, :]
        out = 0.5 * (out + out.T)
        np.fill_diagonal(out, 1.0)
    if np.linalg.eigvalsh(out)[0] < eig_floor * 1e-2:
        raise ShrinkageError("nearest-PD projection failed the eigenvalue check")
    return out


def estimate_pi(r_pearson, t):
    """pi_hat = sum_ij (1 - R_ij^2)^2 / (T - 1); the unit diagonal adds nothing."""
    if t < 2:
        raise ShrinkageError("pi estimate needs T >= 2")
    r = np.asarray(r_pearson, dtype=float)
    return float(np.sum((1.0 - r ** 2) ** 2) / (t - 1.0))


def estimate_gamma(r_sce, r_pearson):
    """gamma_hat: squared Frobenius distance between the two estimates."""
    diff = np.asarray(r_sce, dtype=float) - np.asarray(r_pearson, dtype=float)
    return float(np.sum(diff ** 2))


def estimate_rho_upper(r_sce_var, r_pearson):
    """Cauchy-Schwarz bound: sum_ij sqrt(Var[sqrt(T) R_sce_ij]) * (1 - R_ij^2)."""
    var = np.asarray(r_sce_var, dtype=float)
    if np.any(var < -1e-12):
        raise ShrinkageError("negative structured-estimate variances")
    kernel = 1.0 - np.asarray(r_pearson, dtype=float) ** 2
    return float(np.sum(np.sqrt(np.maximum(var, 0.0)) * np.abs(kernel)))


def sce_entry_variances(fit, cset):
    """Delta-method Var[sqrt(T) R_sce_ij] = J_ij^T I(theta)^-1 J_ij per entry.

    A pseudo-inverse stands in for the inverse when the information matrix
    is numerically singular (flat directions contribute no variance).
    """
    p = fit.fisher.shape[0]
    d = cset.d
    if p == 0:
        return np.zeros((d, d))
    info_inv = np.linalg.pinv(fit.fisher, rcond=1e-12)
    mats = free_derivative_matrices(fit.theta, cset)
    var = np.zeros((d, d))
    for i in range(p):
        for j in range(p):
            var += info_inv[i, j] * (mats[i] * mats[j])
    return np.maximum(var, 0.0)


def _clamp_lambda(raw):
    lam = min(max(raw, 0.0), 1.0)
    return lam, lam != raw


def lambda_closed_form(pi_hat, rho_u_hat, gamma_hat, t):
    """lambda_U = 1 - (1/T)(pi - rho_U)/gamma, clamped to [0, 1].

    Inputs are understood in the sqrt(T)-scaled convention of the optimal
    weight (variances of sqrt(T)-scaled estimates); see :func:`lambda_upper`
    for the wiring that produces them.  A vanishing gamma means the
    structured fit already matches the Pearson estimate; the 0/0 is
    resolved toward the structured side (lambda = 0).
    """
    if t < 1:
        raise ShrinkageError("T must be at least 1")
    if gamma_hat < 1e-12:
        return ShrinkageEstimate(0.0, pi_hat, rho_u_hat, gamma_hat,
                                 "closed_form_upper", True)
    raw = 1.0 - (pi_hat - rho_u_hat) / (t * gamma_hat)
    lam, clamped = _clamp_lambda(raw)
    return ShrinkageEstimate(lam, pi_hat, rho_u_hat, gamma_hat,
                             "closed_form_upper", clamped)


def lambda_upper(fit, cset, r_pearson_pd, t):
    """Closed-form upper-bound shrinkage weight for a fitted model.

    The per-sample Pearson variance estimate is rescaled by T so that both
    moment sums enter the optimal-weight formula in the sqrt(T) convention
    it is stated in; the structured-estimate variances from the delta
    method are already on that scale.
    """
    pi_hat = t * estimate_pi(r_pearson_pd, t)
    rho_hat = estimate_rho_upper(sce_entry_variances(fit, cset), r_pearson_pd)
    gamma_hat = estimate_gamma(fit.R, r_pearson_pd)
    return lambda_closed_form(pi_hat, rho_hat, gamma_hat, t)


def lambda_bootstrap(fit, cset, data, b=100, seed=0, max_iter=100):
    """Parametric-bootstrap shrinkage weight.

    Simulates ``b`` standardized-error datasets of the original (T, mask)
    shape from the PD-projected Pearson-type estimate, refits the
    structured estimator per replicate (initialized at the original
    theta^(0), shortened BFGS) alongside the Pearson-type estimate, and
    plugs empirical moments into the optimal-weight formula:

        pi    = T * sum_ij Var[R_pearson_ij]
        rho   = T * sum_ij Cov[R_sce_ij, R_pearson_ij]
        gamma = sum_ij (mean[R_sce_ij] - R_target_ij)^2

    Replicates draw from per-index substreams, so results do not depend on
    scheduling and are bit-reproducible for a fixed seed.
    """
    errors = data if isinstance(data, StandardizedErrors) else data.standardized_errors()
    t_total, d = errors.values.shape
    mask = errors.mask
    target = nearest_pd_correlation(pearson_type(errors))
    chol = np.linalg.cholesky(target)
    theta0 = fit.theta0 if fit.theta0 is not None else fit.theta

    sum_p = np.zeros((d, d))
    sum_p2 = np.zeros((d, d))
    sum_s = np.zeros((d, d))
    sum_cross = np.zeros((d, d))
    for rep in range(b):
        rng = substream(seed, rep, "bootstrap")
        eps = rng.standard_normal((t_total, d)) @ chol.T
        rep_errors = StandardizedErrors(values=np.where(mask, eps, 0.0), mask=mask)
        r_p = pearson_type(rep_errors)
        r_s = fit_sce(rep_errors, cset, theta0, max_iter=max_iter).R
        sum_p += r_p
        sum_p2 += r_p ** 2
        sum_s += r_s
        sum_cross += r_s * r_p
    mean_p = sum_p / b
    mean_s = sum_s / b
    var_p = sum_p2 / b - mean_p ** 2
    cov_sp = sum_cross / b - mean_s * mean_p
    pi_hat = float(t_total * np.sum(np.maximum(var_p, 0.0)))
    rho_hat = float(t_total * np.sum(cov_sp))
    gamma_hat = float(np.sum((mean_s - target) ** 2))
    if gamma_hat < 1e-12:
        return ShrinkageEstimate(0.0, pi_hat, rho_hat, gamma_hat, "bootstrap", True)
    raw = 1.0 - (pi_hat - rho_hat) / (t_total * gamma_hat)
    lam, clamped = _clamp_lambda(raw)
    return ShrinkageEstimate(lam, pi_hat, rho_hat, gamma_hat, "bootstrap", clamped)


def wsce(r_sce, r_pearson_pd, lam):
    """Convex combination (1 - lambda) R_sce + lambda R_pearson."""
    if not 0.0 <= lam <= 1.0:
        raise ShrinkageError("lambda must lie in [0, 1]")
    return (1.0 - lam) * np.asarray(r_sce) + lam * np.asarray(r_pearson_pd)
