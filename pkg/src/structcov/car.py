"""Spatial correlation from a conditional autoregressive (CAR) model.

For a 0/1 adjacency M with degrees v_i, the unnormalized CAR covariance is
(M2 - beta*M)^-1 = (I - beta*M1)^-1 M2^-1 with M1 = M2^-1 M row-normalized
and M2 = diag(v).  Rescaling to unit diagonal yields the spatial correlation
Gamma(beta)^-1.  Because M1 is similar to the symmetric D^-1/2 M D^-1/2, one
eigendecomposition serves every beta:

    C(beta) = D^-1/2 V diag(1/(1 - beta*lambda)) V^T D^-1/2,

and the beta-derivatives only change the diagonal kernel
(1/(1 - beta*lambda) -> lambda/(1 - beta*lambda)^2 -> 2 lambda^2/(1 - beta*lambda)^3).

Zero-degree nodes (islands) have no CAR distribution; their rows/columns are
fixed to identity rows (zero correlation with everything), matching the
limit interpretation, and all their derivatives vanish.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# only the upper endpoint is singular (eigenvalue 1 of the row-normalized
# adjacency); beta is clamped away from it, while any beta > 0 is stable
BETA_MAX = 1.0 - 1e-6


class GraphError(ValueError):
    """Invalid adjacency or out-of-domain beta."""


@dataclass(frozen=True)
class SpatialGraph:
    """Undirected simple graph given by a dense symmetric 0/1 adjacency."""

    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError("adjacency must be square")
        if np.any(a != a.T):
            raise GraphError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise GraphError("adjacency must have a zero diagonal")
        if not np.all(np.isin(a, (0.0, 1.0))):
            raise GraphError("adjacency entries must be 0 or 1")
        object.__setattr__(self, "adjacency", a)

    @staticmethod
    def from_edges(d, edges):
        a = np.zeros((d, d))
        for i, j in edges:
            if i == j:
                raise GraphError("self-loop (%d, %d) not allowed" % (i, j))
            a[i, j] = a[j, i] = 1.0
        return SpatialGraph(a)

    @property
    def d(self):
        return self.adjacency.shape[0]

    @property
    def degrees(self):
        return self.adjacency.sum(axis=1)


@dataclass(frozen=True)
class SpectralGraphCache:
    """One-time spectral data for evaluating Gamma(beta)^-1 at any beta.

    U and U_inv diagonalize the row-normalized adjacency restricted to the
    non-island nodes; ``lam`` are its eigenvalues (all within [-1, 1] by
    Perron-Frobenius).
    """

    d: int
    degrees: np.ndarray
    islands: np.ndarray  # sorted indices of zero-degree nodes
    nodes: np.ndarray    # sorted indices of non-island nodes
    lam: np.ndarray
    U: np.ndarray
    U_inv: np.ndarray
    # scaled eigenvectors: W = D^-1/2 V so that C = W diag(kernel) W^T
    W: np.ndarray = field(repr=False)


def decompose(graph):
    """Eigendecompose the row-normalized adjacency once for all beta."""
    a = graph.adjacency
    deg = graph.degrees
    islands = np.where(deg == 0)[0]
    nodes = np.where(deg > 0)[0]
    if nodes.size == 0:
        empty = np.zeros((0, 0))
        return SpectralGraphCache(d=graph.d, degrees=deg, islands=islands, nodes=nodes,
                                  lam=np.zeros(0), U=empty, U_inv=empty, W=empty)
    sub = a[np.ix_(nodes, nodes)]
    v = deg[nodes]
    rs = 1.0 / np.sqrt(v)
    # symmetric similar matrix shares the (real) spectrum of M1 = D^-1 M
    sym = sub * rs[:, None] * rs[None, :]
    lam, vec = np.linalg.eigh(sym)
    if np.max(np.abs(lam)) > 1.0 + 1e-10:
        raise GraphError("row-normalized adjacency has |eigenvalue| > 1")
    u = vec * rs[:, None]                 # U = D^-1/2 V
    u_inv = vec.T * np.sqrt(v)[None, :]   # U^-1 = V^T D^1/2
    return SpectralGraphCache(d=graph.d, degrees=deg, islands=islands, nodes=nodes,
                              lam=lam, U=u, U_inv=u_inv, W=u)


def _check_beta(beta):
    b = float(beta)
    if not 0.0 < b < 1.0:
        raise GraphError("beta must lie strictly in (0, 1), got %r" % beta)
    return min(b, BETA_MAX)


def _cov_and_derivs(cache, beta, order):
    """C, C', C'' (up to ``order``) of the unnormalized covariance on non-islands."""
    x = beta * cache.lam
    out = [(cache.W * (1.0 / (1.0 - x))) @ cache.W.T]
    if order >= 1:
        out.append((cache.W * (cache.lam / (1.0 - x) ** 2)) @ cache.W.T)
    if order >= 2:
        out.append((cache.W * (2.0 * cache.lam ** 2 / (1.0 - x) ** 3)) @ cache.W.T)
    return out


def _embed(cache, sub):
    full = np.zeros((cache.d, cache.d))
    full[np.ix_(cache.nodes, cache.nodes)] = sub
    return full


def car_correlation(cache, beta):
    """Gamma(beta)^-1: unit-diagonal spatial correlation; identity rows on islands."""
    beta = _check_beta(beta)
    out = np.eye(cache.d)
    if cache.nodes.size == 0:
        return out
    (c,) = _cov_and_derivs(cache, beta, 0)
    s = 1.0 / np.sqrt(np.diag(c))
    corr = c * s[:, None] * s[None, :]
    np.fill_diagonal(corr, 1.0)  # exact unit diagonal post-normalization
    full = _embed(cache, corr)
    full[cache.islands, cache.islands] = 1.0
    return full


def car_correlation_grad(cache, beta):
    """d/dbeta of car_correlation; zero diagonal by construction."""
    beta = _check_beta(beta)
    if cache.nodes.size == 0:
        return np.zeros((cache.d, cache.d))
    c, dc = _cov_and_derivs(cache, beta, 1)
    q = np.diag(c)
    s = 1.0 / np.sqrt(q)
    ds = -0.5 * q ** -1.5 * np.diag(dc)
    corr = c * s[:, None] * s[None, :]
    grad = (dc * s[:, None] * s[None, :]
            + c * ds[:, None] * s[None, :]
            + c * s[:, None] * ds[None, :])
    np.fill_diagonal(grad, 0.0)
    del corr
    return _embed(cache, grad)


def car_correlation_hess(cache, beta):
    """d^2/dbeta^2 of car_correlation, by the product rule on S(b) C(b) S(b)."""
    beta = _check_beta(beta)
    if cache.nodes.size == 0:
        return np.zeros((cache.d, cache.d))
    c, dc, d2c = _cov_and_derivs(cache, beta, 2)
    q, dq, d2q = np.diag(c), np.diag(dc), np.diag(d2c)
    s = q ** -0.5
    ds = -0.5 * q ** -1.5 * dq
    d2s = 0.75 * q ** -2.5 * dq ** 2 - 0.5 * q ** -1.5 * d2q
    hess = (d2c * s[:, None] * s[None, :]
            + c * d2s[:, None] * s[None, :]
            + c * s[:, None] * d2s[None, :]
            + 2.0 * dc * ds[:, None] * s[None, :]
            + 2.0 * dc * s[:, None] * ds[None, :]
            + 2.0 * c * ds[:, None] * ds[None, :])
    np.fill_diagonal(hess, 0.0)
    return _embed(cache, hess)
