"""Maximum likelihood for the structured correlation model.

The working objective is the transformed log-likelihood of the
standardized errors,

    l(theta) = -log|R(theta)| - tr(S_T R(theta)^-1),
    S_T = (1/T) sum_t eps_t eps_t^T,

maximized over the free coordinates (alpha_1..alpha_K, delta, beta); the
identity weight alpha_0 is the simplex residual.  With missing entries the
per-time marginal Gaussian terms replace the single S_T form:

    l(theta) = -(1/T) sum_t [ log|R_oo| + eps_o^T R_oo^-1 eps_o ],

which reduces exactly to the complete-data expression when everything is
observed.  Optimization runs in unconstrained coordinates -- log-ratios
against alpha_0 for the weights and a logit for beta -- with the analytic
gradient mapped through the softmax/sigmoid Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize
from scipy.stats import norm

from . import car
from .components import ComponentError, CovariateSet, ParameterVector, assemble_correlation
from .initialization import StandardizedErrors

COORD_CAP = 15.0
GRAD_TOL = 1e-6
MAX_ITER = 500


class LikelihoodError(ValueError):
    """Degenerate data (no observations) or invalid inputs."""


@dataclass(frozen=True)
class Dataset:
    """Observations with mask and per-time mean/scale vectors.

    In "known" mode the caller supplies mu/sigma (per time point, e.g. from
    an external model); in "unknown" mode they default to per-variable
    empirical mean and SD (ddof=1) pooled over observed times.
    """

    y: np.ndarray
    mask: np.ndarray
    mu_hat: np.ndarray
    sigma_hat: np.ndarray

    def __post_init__(self):
        for name in ("y", "mask", "mu_hat", "sigma_hat"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))
        if not (self.y.shape == self.mask.shape == self.mu_hat.shape == self.sigma_hat.shape):
            raise LikelihoodError("y, mask, mu_hat and sigma_hat must share a T x d shape")
        if np.any(self.sigma_hat[self.mask] <= 0):
            raise LikelihoodError("sigma_hat must be positive wherever observed")

    @staticmethod
    def from_observations(y, mask=None, mu=None, sigma=None):
        """Build a dataset, filling mu/sigma empirically when not given."""
        y = np.asarray(y, dtype=float)
        t, d = y.shape
        mask = np.ones((t, d), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        if (mu is None) != (sigma is None):
            raise LikelihoodError("give both mu and sigma or neither")
        if mu is None:
            counts = mask.sum(axis=0)
            filled = np.where(mask, y, 0.0)
            means = np.divide(filled.sum(axis=0), counts,
                              out=np.zeros(d), where=counts > 0)
            sq = np.where(mask, (y - means) ** 2, 0.0).sum(axis=0)
            with np.errstate(invalid="ignore", divide="ignore"):
                sds = np.sqrt(sq / np.maximum(counts - 1, 1))
            sds[(counts < 2) | (sds <= 0)] = 1.0  # degenerate columns: scale left alone
            mu = np.broadcast_to(means, (t, d)).copy()
            sigma = np.broadcast_to(sds, (t, d)).copy()
        else:
            mu = np.broadcast_to(np.asarray(mu, dtype=float), (t, d)).copy()
            sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (t, d)).copy()
        return Dataset(y=y, mask=mask, mu_hat=mu, sigma_hat=sigma)

    @property
    def t(self):
        return self.y.shape[0]

    @property
    def d(self):
        return self.y.shape[1]

    def standardized_errors(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            eps = (self.y - self.mu_hat) / self.sigma_hat
        eps = np.where(self.mask, eps, 0.0)
        return StandardizedErrors(values=eps, mask=self.mask)


@dataclass(frozen=True)
class FitResult:
    theta: ParameterVector
    R: np.ndarray
    loglik_transformed: float
    fisher: np.ndarray
    converged: bool
    iterations: int
    grad_norm: float
    t: int
    n_obs: int
    theta0: ParameterVector | None = None
    free_names: tuple = ()


def _errors_of(data):
    if isinstance(data, StandardizedErrors):
        return data
    return data.standardized_errors()


# ---------------------------------------------------------------------------
# complete-data objective
# ---------------------------------------------------------------------------

def _chol(r):
    try:
        return cho_factor(r, lower=True)
    except np.linalg.LinAlgError as exc:  # cannot occur for a valid theta
        raise LikelihoodError("model correlation is numerically singular") from exc


def _spatial_pieces(theta, cset, want_grad):
    """Evaluate Gamma(beta)^-1 (and its derivative) once per call site."""
    if not cset.has_spatial:
        return None, None
    gamma = car.car_correlation(cset.cache, theta.beta)
    dgamma = car.car_correlation_grad(cset.cache, theta.beta) if want_grad else None
    return gamma, dgamma


def _component_value(comp, gamma):
    if not comp.spatial_dependent:
        return comp.matrix
    return gamma if comp.kind == "spatial" else comp.mask * gamma


def _build_r(theta, cset, gamma):
    r = theta.alpha[0] * np.eye(cset.d)
    for a_k, comp in zip(theta.alpha[1:], cset.components[1:]):
        r += a_k * _component_value(comp, gamma)
    if cset.has_spatial:
        r += theta.delta * gamma
    return r


def _deriv_mats(theta, cset, gamma, dgamma):
    eye = np.eye(cset.d)
    mats = [_component_value(comp, gamma) - eye for comp in cset.components[1:]]
    if cset.has_spatial:
        mats.append(gamma - eye)
        g_beta = theta.delta * dgamma
        for a_k, comp in zip(theta.alpha[1:], cset.components[1:]):
            if comp.spatial_dependent:
                g_beta = g_beta + a_k * (comp.mask * dgamma)
        mats.append(g_beta)
    return mats


def objective_l(theta, cset, s_t):
    """l = -log|R| - tr(S_T R^-1) via a Cholesky factorization of R."""
    r = assemble_correlation(theta, cset)
    c = _chol(r)
    logdet = 2.0 * np.sum(np.log(np.diag(c[0])))
    rinv_s = cho_solve(c, s_t)
    return float(-logdet - np.trace(rinv_s))


def free_derivative_matrices(theta, cset):
    """dR/dtheta_m for the free coordinates (alpha_0 eliminated).

    dR/dalpha_k = F_k - I; dR/ddelta = Gamma^-1 - I; dR/dbeta collects the
    spatial effect and every component that interacts with it.
    """
    gamma, dgamma = _spatial_pieces(theta, cset, want_grad=True)
    return _deriv_mats(theta, cset, gamma, dgamma)


def gradient_l(theta, cset, s_t):
    """Analytic gradient of l over the free coordinates."""
    if cset.n_free == 0:
        return np.zeros(0)
    r = assemble_correlation(theta, cset)
    c = _chol(r)
    rinv = cho_solve(c, np.eye(cset.d))
    a = rinv - rinv @ s_t @ rinv
    return np.array([-np.sum(g * a) for g in free_derivative_matrices(theta, cset)])


def _value_and_grad_complete(theta, cset, s_t):
    """Fused objective and gradient sharing one spatial evaluation and Cholesky."""
    gamma, dgamma = _spatial_pieces(theta, cset, want_grad=cset.n_free > 0)
    r = _build_r(theta, cset, gamma)
    c = _chol(r)
    logdet = 2.0 * np.sum(np.log(np.diag(c[0])))
    rinv = cho_solve(c, np.eye(cset.d))
    value = float(-logdet - np.sum(rinv * s_t))
    if cset.n_free == 0:
        return value, np.zeros(0)
    a = rinv - rinv @ s_t @ rinv
    grad = np.array([-np.sum(g * a)
                     for g in _deriv_mats(theta, cset, gamma, dgamma)])
    return value, grad


# ---------------------------------------------------------------------------
# missing-data objective
# ---------------------------------------------------------------------------

def _mask_groups(mask):
    groups = {}
    for t, row in enumerate(mask):
        groups.setdefault(row.tobytes(), []).append(t)
    out = []
    for key, idx in groups.items():
        obs = np.where(np.frombuffer(key, dtype=bool))[0]
        if obs.size:
            out.append((obs, np.array(idx)))
    return out


def objective_l_missing(theta, cset, data):
    """Marginalized objective and gradient; equals the complete pair when unmasked.

    Time points sharing a mask pattern share one Cholesky factorization.
    Gradient contributions are scattered from each observed submatrix into
    a full-size accumulator before contracting with dR/dtheta.
    """
    errors = _errors_of(data)
    eps, mask = errors.values, errors.mask
    t_total = eps.shape[0]
    groups = _mask_groups(mask)
    if not groups:
        raise LikelihoodError("every time point is fully unobserved")

    gamma, dgamma = _spatial_pieces(theta, cset, want_grad=cset.n_free > 0)
    r = _build_r(theta, cset, gamma)
    value = 0.0
    acc = np.zeros_like(r)
    for obs, idx in groups:
        sub = r[np.ix_(obs, obs)]
        c = _chol(sub)
        logdet = 2.0 * np.sum(np.log(np.diag(c[0])))
        e = eps[np.ix_(idx, obs)]
        w = cho_solve(c, e.T)  # R_oo^-1 eps_t, one column per time
        value += idx.size * logdet + float(np.sum(e.T * w))
        sub_inv = cho_solve(c, np.eye(obs.size))
        acc[np.ix_(obs, obs)] += idx.size * sub_inv - w @ w.T
    value = -value / t_total
    if cset.n_free == 0:
        return value, np.zeros(0)
    grad = np.array([-np.sum(g * acc) / t_total
                     for g in _deriv_mats(theta, cset, gamma, dgamma)])
    return value, grad


# ---------------------------------------------------------------------------
# unconstrained coordinates
# ---------------------------------------------------------------------------

def reparametrize(theta):
    """Map theta to unconstrained coordinates, capped at |x| <= 15.

    Weight coordinates are log(alpha_k / alpha_0) (and log(delta / alpha_0));
    beta maps through a logit.
    """
    a0 = theta.alpha[0]
    x = list(np.log(theta.alpha[1:] / a0))
    if theta.has_spatial:
        x.append(np.log(theta.delta / a0))
        x.append(np.log(theta.beta / (1.0 - theta.beta)))
    return np.clip(np.array(x), -COORD_CAP, COORD_CAP)


def unreparametrize(x, cset):
    """Inverse map: softmax against the implicit alpha_0 slot, sigmoid for beta."""
    x = np.clip(np.asarray(x, dtype=float), -COORD_CAP, COORD_CAP)
    if x.size != cset.n_free:
        raise ComponentError("expected %d coordinates, got %d" % (cset.n_free, x.size))
    if cset.has_spatial:
        wx, xb = x[:-1], x[-1]
        beta = 1.0 / (1.0 + np.exp(-xb))
    else:
        wx, beta = x, None
    ex = np.exp(wx)
    z = 1.0 + ex.sum()
    w = ex / z
    alpha = np.concatenate([[1.0 / z], w[:cset.n_alpha - 1]])
    delta = float(w[-1]) if cset.has_spatial else None
    return ParameterVector(alpha, delta, beta)


def _grad_to_unconstrained(g_free, theta):
    """Chain rule through the softmax/sigmoid reparametrization."""
    if theta.has_spatial:
        g_w, g_beta = g_free[:-1], g_free[-1]
        w = np.append(theta.alpha[1:], theta.delta)
    else:
        g_w, g_beta = g_free, None
        w = theta.alpha[1:]
    gx = w * (g_w - np.dot(w, g_w))
    if theta.has_spatial:
        gx = np.append(gx, g_beta * theta.beta * (1.0 - theta.beta))
    return gx


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def fit_sce(data, cset, theta0, max_iter=MAX_ITER, gtol=GRAD_TOL):
    """BFGS maximization of l from a strictly interior start.

    Returns the best iterate even on non-convergence (converged=False); the
    result never falls below the starting value of l.
    """
    if isinstance(data, StandardizedErrors):
        errors = data
        t_total = errors.values.shape[0]
        n_obs = int(errors.mask.sum())
    else:
        errors = data.standardized_errors()
        t_total = data.t
        n_obs = int(data.mask.sum())
    complete = errors.complete
    s_t = (errors.values.T @ errors.values) / t_total if complete else None

    if cset.n_free == 0:
        theta = ParameterVector(np.array([1.0]))
        value = objective_l(theta, cset, s_t) if complete \
            else objective_l_missing(theta, cset, errors)[0]
        return FitResult(theta=theta, R=np.eye(cset.d), loglik_transformed=value,
                         fisher=np.zeros((0, 0)), converged=True, iterations=0,
                         grad_norm=0.0, t=t_total, n_obs=n_obs, theta0=theta0,
                         free_names=())

    def negative(x):
        x_eff = np.clip(x, -COORD_CAP, COORD_CAP)
        theta = unreparametrize(x_eff, cset)
        if complete:
            val, g_free = _value_and_grad_complete(theta, cset, s_t)
        else:
            val, g_free = objective_l_missing(theta, cset, errors)
        gx = _grad_to_unconstrained(g_free, theta)
        gx[x != x_eff] = 0.0  # objective is flat beyond the coordinate cap
        return -val, -gx

    x0 = reparametrize(theta0)
    f0, _ = negative(x0)
    res = minimize(negative, x0, jac=True, method="BFGS",
                   options={"gtol": gtol, "maxiter": max_iter})
    x_hat, f_hat = (res.x, res.fun) if res.fun <= f0 else (x0, f0)
    theta_hat = unreparametrize(x_hat, cset)
    grad_norm = float(np.max(np.abs(negative(x_hat)[1]))) if x_hat is not res.x \
        else float(np.max(np.abs(res.jac)))
    return FitResult(
        theta=theta_hat,
        R=assemble_correlation(theta_hat, cset),
        loglik_transformed=float(-f_hat),
        fisher=fisher_information(theta_hat, cset),
        converged=bool(grad_norm < gtol),
        iterations=int(res.nit),
        grad_norm=grad_norm,
        t=t_total,
        n_obs=n_obs,
        theta0=theta0,
        free_names=tuple(cset.free_names()),
    )


def fisher_information(theta, cset):
    """I_mn = 1/2 tr(R^-1 dR/dtheta_m R^-1 dR/dtheta_n) over free coordinates."""
    p = cset.n_free
    if p == 0:
        return np.zeros((0, 0))
    r = assemble_correlation(theta, cset)
    c = _chol(r)
    rinv = cho_solve(c, np.eye(cset.d))
    mats = free_derivative_matrices(theta, cset)
    sandwich = [rinv @ g @ rinv for g in mats]
    info = np.empty((p, p))
    for i in range(p):
        for j in range(i, p):
            info[i, j] = info[j, i] = 0.5 * np.sum(sandwich[i] * mats[j])
    return info


def loglikelihood(fit):
    """Actual Gaussian log-likelihood of the standardized errors at the fit."""
    return 0.5 * fit.t * fit.loglik_transformed - 0.5 * np.log(2.0 * np.pi) * fit.n_obs


def confidence_intervals(fit, level=0.95):
    """Wald intervals theta_i +/- z * sqrt((T I)^-1_ii) on the free coordinates."""
    p = fit.fisher.shape[0]
    if p == 0:
        return {}
    eigvals, eigvecs = np.linalg.eigh(fit.fisher)
    if eigvals[0] <= eigvals[-1] * 1e-12 or eigvals[0] <= 0.0:
        flat = int(np.argmax(np.abs(eigvecs[:, 0])))
        names = fit.free_names or tuple(str(i) for i in range(p))
        raise LikelihoodError("singular Fisher information: flat direction along %r"
                              % names[flat])
    z = norm.ppf(0.5 + level / 2.0)
    cov = np.linalg.inv(fit.t * fit.fisher)
    half = z * np.sqrt(np.diag(cov))
    values = fit.theta.free_values()
    names = fit.free_names or tuple(str(i) for i in range(p))
    return {name: (float(v), float(v - h), float(v + h))
            for name, v, h in zip(names, values, half)}
