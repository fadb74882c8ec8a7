"""Correlation-matrix components and their convex-combination assembly.

A model correlation matrix is built as

    R = alpha_0 * I + sum_k alpha_k * F_k + delta * Gamma(beta)^-1

where every F_k is a known unit-diagonal PSD correlation matrix (cluster
co-membership, an all-ones global block, a user-supplied matrix, or a
Hadamard interaction of two components) and Gamma(beta)^-1 is the spatial
correlation evaluated from a graph (see the car module).  The weights
(alpha_0, ..., alpha_K, delta) are positive and sum to one, so R is itself
a unit-diagonal correlation matrix with smallest eigenvalue >= alpha_0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import car

SYM_TOL = 1e-12
PSD_TOL = -1e-8
SIMPLEX_TOL = 1e-10


class ComponentError(ValueError):
    """Invalid component construction or inconsistent parameter vector."""


def _symmetrize(m, tol=SYM_TOL):
    sym = 0.5 * (m + m.T)
    if np.max(np.abs(sym - m)) >= tol:
        raise ComponentError("matrix is not symmetric within %g" % tol)
    return sym


def _check_component_matrix(m):
    m = _symmetrize(np.asarray(m, dtype=float))
    d = m.shape[0]
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ComponentError("component matrix must be square")
    if np.max(np.abs(np.diag(m) - 1.0)) > SYM_TOL:
        raise ComponentError("component matrix must have unit diagonal")
    if np.max(np.abs(m)) > 1.0 + SYM_TOL:
        raise ComponentError("component entries must lie in [-1, 1]")
    if d > 1 and np.linalg.eigvalsh(m)[0] < PSD_TOL:
        raise ComponentError("component matrix is not positive semidefinite")
    return m


@dataclass(frozen=True)
class ClusterCovariate:
    """Cluster membership labels for the d variables (labels in 0..m-1)."""

    labels: np.ndarray
    name: str = "cluster"

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        if labels.ndim != 1 or labels.size < 2:
            raise ComponentError("need at least two labelled variables")
        if labels.min() < 0:
            raise ComponentError("labels must be nonnegative integers")
        object.__setattr__(self, "labels", labels)

    @property
    def d(self):
        return self.labels.size

    def membership_matrix(self):
        # one-hot f with F = f f^T
        m = int(self.labels.max()) + 1
        f = np.zeros((self.d, m))
        f[np.arange(self.d), self.labels] = 1.0
        return f


@dataclass(frozen=True)
class ComponentMatrix:
    """One correlation-matrix component of the model.

    ``matrix`` holds the dense values for static kinds.  The spatial kind
    and interactions with a spatial parent are beta-dependent: they store
    the 0/1 mask of the static parent (``mask``) and are evaluated against
    the graph cache by :meth:`value`.
    """

    kind: str  # identity | cluster | global | spatial | interaction
    name: str
    matrix: np.ndarray | None = None
    parents: tuple[str, str] | None = None
    mask: np.ndarray | None = None  # static parent values for spatial interactions
    d: int = 0

    @property
    def spatial_dependent(self):
        return self.kind == "spatial" or (self.kind == "interaction" and self.mask is not None)

    def value(self, cache=None, beta=None):
        """Dense matrix of this component, evaluated at beta if spatial-dependent."""
        if not self.spatial_dependent:
            return self.matrix
        if cache is None or beta is None:
            raise ComponentError("component %r needs a graph cache and beta" % self.name)
        gamma = car.car_correlation(cache, beta)
        if self.kind == "spatial":
            return gamma
        return self.mask * gamma

    def dvalue_dbeta(self, cache=None, beta=None, order=1):
        """First or second beta-derivative; zero matrix for static components."""
        if not self.spatial_dependent:
            return np.zeros((self.d, self.d))
        dgamma = (car.car_correlation_grad if order == 1 else car.car_correlation_hess)(cache, beta)
        if self.kind == "spatial":
            return dgamma
        return self.mask * dgamma


def build_cluster_matrix(labels, name="cluster"):
    """F_ij = 1 iff i and j share a cluster label; PSD by F = f f^T."""
    cov = labels if isinstance(labels, ClusterCovariate) else ClusterCovariate(np.asarray(labels), name)
    f = cov.membership_matrix()
    m = f @ f.T
    return ComponentMatrix(kind="cluster", name=cov.name, matrix=_check_component_matrix(m), d=cov.d)


def build_global_matrix(d, name="global"):
    """All-ones component: every pair shares the global effect."""
    if d < 2:
        raise ComponentError("global component needs d >= 2")
    return ComponentMatrix(kind="global", name=name, matrix=np.ones((d, d)), d=d)


def build_identity(d):
    if d < 2:
        raise ComponentError("identity component needs d >= 2")
    return ComponentMatrix(kind="identity", name="identity", matrix=np.eye(d), d=d)


def build_matrix_component(m, name):
    """Wrap a user-supplied unit-diagonal PSD matrix as a component."""
    m = _check_component_matrix(m)
    return ComponentMatrix(kind="cluster", name=name, matrix=m, d=m.shape[0])


def hadamard_interaction(a, b, name=None):
    """Entrywise product of two components (PSD by the Schur product theorem).

    At most one parent may be spatial; the result of a cluster x spatial
    product stays beta-dependent and is evaluated lazily.
    """
    if a.d != b.d:
        raise ComponentError("interaction parents have mismatched dimensions")
    spatials = [c for c in (a, b) if c.kind == "spatial"]
    if len(spatials) > 1:
        raise ComponentError("an interaction may have at most one spatial parent")
    name = name or "%sx%s" % (a.name, b.name)
    parents = (a.name, b.name)
    if len(spatials) == 1:
        static = a if b.kind == "spatial" else b
        if static.spatial_dependent:
            raise ComponentError("nested spatial interactions are not supported")
        return ComponentMatrix(kind="interaction", name=name, parents=parents,
                               mask=static.matrix, d=a.d)
    if a.spatial_dependent or b.spatial_dependent:
        raise ComponentError("nested spatial interactions are not supported")
    m = _check_component_matrix(a.matrix * b.matrix)
    return ComponentMatrix(kind="interaction", name=name, matrix=m, parents=parents, d=a.d)


@dataclass(frozen=True)
class CovariateSet:
    """Ordered roster of components: index 0 is always the identity.

    ``components`` carries every alpha-weighted component (identity,
    clusters, global, interactions -- including interactions with the
    spatial effect).  The pure spatial effect, weighted by delta, lives in
    ``spatial``/``cache``.
    """

    d: int
    components: tuple[ComponentMatrix, ...]
    spatial: car.SpatialGraph | None = None
    cache: car.SpectralGraphCache | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.components or self.components[0].kind != "identity":
            raise ComponentError("component 0 must be the identity")
        if sum(1 for c in self.components if c.kind == "identity") != 1:
            raise ComponentError("exactly one identity component expected")
        names = [c.name for c in self.components]
        if len(set(names)) != len(names):
            raise ComponentError("component names must be unique")
        for c in self.components:
            if c.d != self.d:
                raise ComponentError("component %r dimension mismatch" % c.name)
            if c.parents is not None:
                known = set(names) | ({self.spatial_name} if self.has_spatial else set())
                missing = [p for p in c.parents if p not in known]
                if missing:
                    raise ComponentError("interaction %r references unknown parent %s"
                                         % (c.name, missing))
            if c.spatial_dependent and not self.has_spatial:
                raise ComponentError("component %r needs the spatial effect in the set" % c.name)
        if self.spatial is not None and self.cache is None:
            object.__setattr__(self, "cache", car.decompose(self.spatial))

    spatial_name = "spatial"

    @property
    def has_spatial(self):
        return self.spatial is not None

    @property
    def n_alpha(self):
        """Number of alpha weights (identity included)."""
        return len(self.components)

    @property
    def n_free(self):
        """Free coordinates after eliminating alpha_0: alphas, then delta, beta."""
        return (self.n_alpha - 1) + (2 if self.has_spatial else 0)

    def free_names(self):
        names = [c.name for c in self.components[1:]]
        if self.has_spatial:
            names += ["delta", "beta"]
        return names

    def component_names(self):
        names = [c.name for c in self.components]
        if self.has_spatial:
            names.append(self.spatial_name)
        return names

    def restrict(self, keep):
        """Sub-model with only the named non-identity components (identity stays).

        ``keep`` lists component names; include ``"spatial"`` to keep the
        spatial effect.  The interaction hierarchy rule is enforced: an
        interaction may remain only if both parents remain.
        """
        keep = set(keep)
        keep.discard("identity")
        unknown = keep - set(self.component_names())
        if unknown:
            raise ComponentError("unknown components in restriction: %s" % sorted(unknown))
        spatial_kept = self.spatial_name in keep and self.has_spatial
        comps = [self.components[0]]
        for c in self.components[1:]:
            if c.name not in keep:
                continue
            if c.parents is not None:
                for p in c.parents:
                    present = p in keep or (p == self.spatial_name and spatial_kept)
                    if not present:
                        raise ComponentError(
                            "interaction %r requires parent %r in the model" % (c.name, p))
            comps.append(c)
        return CovariateSet(
            d=self.d,
            components=tuple(comps),
            spatial=self.spatial if spatial_kept else None,
            cache=self.cache if spatial_kept else None,
        )


@dataclass(frozen=True)
class ParameterVector:
    """Model weights: alpha (alpha_0 first), optional delta and beta.

    Invariants: all weights strictly positive, alpha-sum plus delta equals
    one, and beta lies strictly inside (0, 1) whenever a spatial effect is
    present.
    """

    alpha: np.ndarray
    delta: float | None = None
    beta: float | None = None

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        object.__setattr__(self, "alpha", alpha)
        if (self.delta is None) != (self.beta is None):
            raise ComponentError("delta and beta must be given together")
        weights = alpha if self.delta is None else np.append(alpha, self.delta)
        if np.any(weights <= 0):
            raise ComponentError("all weights must be strictly positive")
        if abs(weights.sum() - 1.0) > SIMPLEX_TOL:
            raise ComponentError("weights must sum to 1 (got %.12g)" % weights.sum())
        if self.beta is not None and not 0.0 < self.beta < 1.0:
            raise ComponentError("beta must lie strictly in (0, 1)")

    @property
    def has_spatial(self):
        return self.delta is not None

    def free_values(self):
        """Non-identity weights in component order, then delta and beta."""
        vals = list(self.alpha[1:])
        if self.has_spatial:
            vals += [self.delta, self.beta]
        return np.array(vals)

    @staticmethod
    def from_free(values, cset):
        """Rebuild from free coordinates (alpha_0 is the residual)."""
        values = np.asarray(values, dtype=float)
        if values.size != cset.n_free:
            raise ComponentError("expected %d free values, got %d" % (cset.n_free, values.size))
        k = cset.n_alpha - 1
        alphas = values[:k]
        delta = beta = None
        if cset.has_spatial:
            delta, beta = values[k], values[k + 1]
        a0 = 1.0 - alphas.sum() - (delta or 0.0)
        return ParameterVector(np.concatenate([[a0], alphas]), delta, beta)


def assemble_correlation(params, cset):
    """R = sum_k alpha_k F_k + delta Gamma(beta)^-1 for a consistent pair.

    Unit diagonal and positive definiteness (smallest eigenvalue >= alpha_0)
    follow from the simplex constraint on the weights.
    """
    if params.alpha.size != cset.n_alpha:
        raise ComponentError("parameter vector has %d alphas for %d components"
                             % (params.alpha.size, cset.n_alpha))
    if params.has_spatial != cset.has_spatial:
        raise ComponentError("spatial weight present iff the set has a spatial effect")
    r = np.zeros((cset.d, cset.d))
    for a_k, comp in zip(params.alpha, cset.components):
        r += a_k * comp.value(cset.cache, params.beta)
    if cset.has_spatial:
        r += params.delta * car.car_correlation(cset.cache, params.beta)
    return r
