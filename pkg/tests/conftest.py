import numpy as np
import pytest

from structcov.car import SpatialGraph
from structcov.components import (CovariateSet, ParameterVector,
                                  build_cluster_matrix, build_global_matrix,
                                  build_identity)


def random_graph(d, p, rng):
    upper = np.triu(rng.random((d, d)) < p, 1).astype(float)
    return SpatialGraph(upper + upper.T)


def random_connected_graph(d, rng, extra=0.3):
    """Random tree plus extra edges: connected, no islands."""
    a = np.zeros((d, d))
    for i in range(1, d):
        j = int(rng.integers(0, i))
        a[i, j] = a[j, i] = 1.0
    upper = np.triu(rng.random((d, d)) < extra, 1)
    a = np.maximum(a, upper + upper.T)
    np.fill_diagonal(a, 0.0)
    return SpatialGraph(a)


def car_corr_dense(adjacency, beta):
    """Independent oracle: invert (M2 - beta*M) directly and normalize."""
    adjacency = np.asarray(adjacency, dtype=float)
    d = adjacency.shape[0]
    deg = adjacency.sum(axis=1)
    non = np.where(deg > 0)[0]
    out = np.eye(d)
    if non.size:
        sub = adjacency[np.ix_(non, non)]
        cov = np.linalg.inv(np.diag(deg[non]) - beta * sub)
        s = 1.0 / np.sqrt(np.diag(cov))
        out[np.ix_(non, non)] = cov * s[:, None] * s[None, :]
    return out


def simple_cset(d=6, labels=None, graph=None, with_global=False, rng=None):
    """Identity + one cluster (+ optional global and spatial graph)."""
    rng = rng or np.random.default_rng(0)
    if labels is None:
        labels = rng.integers(0, 3, size=d)
        labels[0], labels[1] = 0, 1  # at least two clusters
    comps = [build_identity(d), build_cluster_matrix(np.asarray(labels), "cluster")]
    if with_global:
        comps.append(build_global_matrix(d))
    return CovariateSet(d=d, components=tuple(comps), spatial=graph)


def random_theta(cset, rng, beta=None):
    raw = rng.uniform(0.2, 1.0, size=cset.n_alpha + (1 if cset.has_spatial else 0))
    w = raw / raw.sum()
    if cset.has_spatial:
        return ParameterVector(w[:-1], float(w[-1]),
                               float(beta if beta is not None else rng.uniform(0.1, 0.9)))
    return ParameterVector(w)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
