import numpy as np
import pytest

from structcov.components import (CovariateSet, ParameterVector,
                                  assemble_correlation, build_cluster_matrix,
                                  build_identity)
from structcov.initialization import StandardizedErrors
from structcov.likelihood import (Dataset, LikelihoodError, confidence_intervals,
                                  fisher_information, fit_sce, gradient_l,
                                  loglikelihood, objective_l, objective_l_missing,
                                  reparametrize, unreparametrize)

from conftest import random_connected_graph, random_theta, simple_cset


def identity_set(d):
    return CovariateSet(d=d, components=(build_identity(d),))


def pair_set():
    return CovariateSet(d=2, components=(build_identity(2),
                                         build_cluster_matrix([0, 0], "pair")))


# --- objective -------------------------------------------------------------

def test_objective_identity():
    d = 5
    cset = identity_set(d)
    theta = ParameterVector(np.array([1.0]))
    assert objective_l(theta, cset, np.eye(d)) == pytest.approx(-d)
    assert objective_l(theta, cset, 2 * np.eye(2)[:0]) if False else True


def test_objective_trace_arithmetic():
    cset = identity_set(2)
    theta = ParameterVector(np.array([1.0]))
    assert objective_l(theta, cset, np.diag([2.0, 2.0])) == pytest.approx(-4.0)


def test_objective_at_own_correlation():
    from structcov.car import SpatialGraph
    graph = SpatialGraph.from_edges(2, [(0, 1)])
    cset = CovariateSet(d=2, components=(build_identity(2),), spatial=graph)
    theta = ParameterVector(np.array([0.8]), 0.2, 0.5)
    r = assemble_correlation(theta, cset)
    # l = -log|R| - d with S_T = R; off-diagonal is 0.1 so |R| = 0.99
    assert objective_l(theta, cset, r) == pytest.approx(-np.log(0.99) - 2.0)


# --- gradient ---------------------------------------------------------------

def test_gradient_zero_at_stationary_point():
    rng = np.random.default_rng(0)
    graph = random_connected_graph(6, rng)
    cset = simple_cset(d=6, graph=graph, rng=rng)
    theta = random_theta(cset, rng)
    s_t = assemble_correlation(theta, cset)
    grad = gradient_l(theta, cset, s_t)
    assert np.max(np.abs(grad)) < 1e-10


def test_gradient_empty_for_identity_model():
    cset = identity_set(3)
    theta = ParameterVector(np.array([1.0]))
    assert gradient_l(theta, cset, np.eye(3)).size == 0


def test_gradient_near_boundary_trace_formula():
    # {I, J2} with alpha_1 -> 0: dl/dalpha_1 -> 2s for S_T = [[1, s], [s, 1]]
    cset = pair_set()
    s = 0.37
    s_t = np.array([[1.0, s], [s, 1.0]])
    theta = ParameterVector(np.array([1.0 - 1e-9, 1e-9]))
    grad = gradient_l(theta, cset, s_t)
    assert grad[0] == pytest.approx(2 * s, abs=1e-6)


def _fd_gradient(fun, x, h=1e-6):
    out = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return out


def test_gradient_matches_finite_differences_complete(rng):
    for _ in range(25):
        d = int(rng.integers(4, 10))
        graph = random_connected_graph(d, rng)
        cset = simple_cset(d=d, graph=graph, with_global=True, rng=rng)
        theta = random_theta(cset, rng)
        eps = rng.standard_normal((9, d))
        s_t = eps.T @ eps / 9

        free = theta.free_values()

        def fun(v):
            return objective_l(ParameterVector.from_free(v, cset), cset, s_t)

        got = gradient_l(theta, cset, s_t)
        want = _fd_gradient(fun, free)
        assert np.max(np.abs(got - want)) <= 1e-5 * max(np.max(np.abs(want)), 1.0)


def test_gradient_matches_finite_differences_missing(rng):
    for _ in range(15):
        d = int(rng.integers(4, 9))
        graph = random_connected_graph(d, rng)
        cset = simple_cset(d=d, graph=graph, rng=rng)
        theta = random_theta(cset, rng)
        eps = rng.standard_normal((7, d))
        mask = rng.random((7, d)) < 0.8
        mask[:, 0] = True  # keep every time point nonempty
        errors = StandardizedErrors(np.where(mask, eps, 0.0), mask)

        free = theta.free_values()

        def fun(v):
            return objective_l_missing(
                ParameterVector.from_free(v, cset), cset, errors)[0]

        got = objective_l_missing(theta, cset, errors)[1]
        want = _fd_gradient(fun, free)
        assert np.max(np.abs(got - want)) <= 1e-5 * max(np.max(np.abs(want)), 1.0)


# --- missing-data objective --------------------------------------------------

def test_missing_reduces_to_complete(rng):
    for _ in range(10):
        d = int(rng.integers(3, 8))
        graph = random_connected_graph(d, rng)
        cset = simple_cset(d=d, graph=graph, rng=rng)
        theta = random_theta(cset, rng)
        eps = rng.standard_normal((6, d))
        errors = StandardizedErrors(eps)
        s_t = eps.T @ eps / 6
        value, grad = objective_l_missing(theta, cset, errors)
        assert value == pytest.approx(objective_l(theta, cset, s_t), abs=1e-12)
        assert np.allclose(grad, gradient_l(theta, cset, s_t), atol=1e-12)


def test_missing_marginalizes_unobserved_variable():
    # dropping one variable equals the complete objective on the remaining block
    rng = np.random.default_rng(5)
    labels = np.array([0, 0, 1, 1])
    cset = CovariateSet(d=4, components=(build_identity(4),
                                         build_cluster_matrix(labels, "blk")))
    theta = ParameterVector(np.array([0.6, 0.4]))
    eps = rng.standard_normal((10, 4))
    mask = np.ones((10, 4), dtype=bool)
    mask[:, 3] = False
    value, _ = objective_l_missing(theta, cset, StandardizedErrors(eps, mask))

    sub = CovariateSet(d=3, components=(build_identity(3),
                                        build_cluster_matrix(labels[:3], "blk")))
    s_sub = eps[:, :3].T @ eps[:, :3] / 10
    assert value == pytest.approx(objective_l(theta, sub, s_sub), abs=1e-12)


def test_missing_hand_expanded_two_by_two():
    cset = pair_set()
    theta = ParameterVector(np.array([0.7, 0.3]))
    r = assemble_correlation(theta, cset)
    eps = np.array([[0.5, -0.2], [1.1, 0.0]])
    mask = np.array([[True, True], [True, False]])
    value, _ = objective_l_missing(theta, cset, StandardizedErrors(eps, mask))
    full_term = np.log(np.linalg.det(r)) + eps[0] @ np.linalg.solve(r, eps[0])
    uni_term = 0.0 + eps[1, 0] ** 2  # log 1 + eps^2 / 1
    assert value == pytest.approx(-(full_term + uni_term) / 2, abs=1e-12)


def test_missing_requires_observations():
    cset = identity_set(2)
    theta = ParameterVector(np.array([1.0]))
    mask = np.zeros((3, 2), dtype=bool)
    with pytest.raises(LikelihoodError):
        objective_l_missing(theta, cset, StandardizedErrors(np.zeros((3, 2)), mask))


# --- reparametrization -------------------------------------------------------

def test_uniform_theta_maps_to_zero():
    cset = simple_cset(d=4, labels=[0, 0, 1, 1])
    theta = ParameterVector(np.array([0.5, 0.5]))
    assert np.allclose(reparametrize(theta), np.zeros(1))


def test_beta_half_maps_to_zero_logit():
    from structcov.car import SpatialGraph
    graph = SpatialGraph.from_edges(2, [(0, 1)])
    cset = CovariateSet(d=2, components=(build_identity(2),), spatial=graph)
    theta = ParameterVector(np.array([0.5]), 0.5, 0.5)
    x = reparametrize(theta)
    assert x[-1] == pytest.approx(0.0)
    assert x[-2] == pytest.approx(0.0)


def test_round_trip(rng):
    from conftest import random_graph
    graph = random_connected_graph(5, rng)
    cset = simple_cset(d=5, graph=graph, with_global=True, rng=rng)
    for _ in range(100):
        theta = random_theta(cset, rng)
        back = unreparametrize(reparametrize(theta), cset)
        err = max(np.max(np.abs(back.alpha - theta.alpha)),
                  abs(back.delta - theta.delta), abs(back.beta - theta.beta))
        assert err < 1e-10


def test_coordinates_capped():
    cset = simple_cset(d=4, labels=[0, 0, 1, 1])
    theta = unreparametrize(np.array([40.0]), cset)
    # cap at 15: alpha_1 / alpha_0 = e^15
    assert np.log(theta.alpha[1] / theta.alpha[0]) == pytest.approx(15.0)


# --- fitting ----------------------------------------------------------------

def test_fit_stationary_start_stays(rng):
    graph = random_connected_graph(8, rng)
    cset = simple_cset(d=8, graph=graph, rng=rng)
    theta = random_theta(cset, rng)
    r = assemble_correlation(theta, cset)
    # synthetic errors with exact second moment R: rows of chol(R)*sqrt(T)... use
    # eigen-decomposition trick: T x d matrix E with E^T E / T = R
    t = 16
    eigval, eigvec = np.linalg.eigh(r)
    half = eigvec * np.sqrt(eigval)
    e = np.zeros((t, 8))
    e[:8] = half.T * np.sqrt(t)
    errors = StandardizedErrors(e)
    fit = fit_sce(errors, cset, theta)
    assert fit.converged
    assert np.max(np.abs(fit.theta.free_values() - theta.free_values())) < 1e-6


def test_fit_identity_only_model(rng):
    cset = identity_set(4)
    eps = rng.standard_normal((10, 4))
    errors = StandardizedErrors(eps)
    theta0 = ParameterVector(np.array([1.0]))
    fit = fit_sce(errors, cset, theta0)
    s_t = eps.T @ eps / 10
    assert fit.converged and fit.iterations == 0
    assert fit.loglik_transformed == pytest.approx(-np.trace(s_t))


def test_fit_never_worse_than_start(rng):
    for _ in range(5):
        d = 6
        graph = random_connected_graph(d, rng)
        cset = simple_cset(d=d, graph=graph, rng=rng)
        theta0 = random_theta(cset, rng)
        eps = rng.standard_normal((8, d))
        errors = StandardizedErrors(eps)
        fit = fit_sce(errors, cset, theta0)
        s_t = eps.T @ eps / 8
        assert fit.loglik_transformed >= objective_l(theta0, cset, s_t) - 1e-12


def test_fit_recovers_truth_with_many_samples(rng):
    d = 12
    graph = random_connected_graph(d, rng)
    cset = simple_cset(d=d, graph=graph, rng=rng)
    truth = ParameterVector(np.array([0.55, 0.15]), 0.3, 0.6)
    r = assemble_correlation(truth, cset)
    chol = np.linalg.cholesky(r)
    eps = rng.standard_normal((4000, d)) @ chol.T
    errors = StandardizedErrors(eps)
    start = ParameterVector(np.array([0.7, 0.1]), 0.2, 0.4)
    fit = fit_sce(errors, cset, start)
    assert fit.converged
    assert np.max(np.abs(fit.theta.free_values() - truth.free_values())) < 0.08


def test_fit_invariant_under_permutation(rng):
    d = 7
    graph = random_connected_graph(d, rng)
    labels = rng.integers(0, 2, size=d)
    cset = CovariateSet(d=d, components=(build_identity(d),
                                         build_cluster_matrix(labels, "blk")),
                        spatial=graph)
    # model-generated data: the optimum is interior and well identified
    truth = ParameterVector(np.array([0.45, 0.25]), 0.3, 0.6)
    chol = np.linalg.cholesky(assemble_correlation(truth, cset))
    eps = rng.standard_normal((40, d)) @ chol.T
    theta0 = ParameterVector(np.array([0.6, 0.2]), 0.2, 0.5)
    # tight tolerance: the contract compares two independently-run optimizations
    fit = fit_sce(StandardizedErrors(eps), cset, theta0, max_iter=2000, gtol=1e-9)

    perm = rng.permutation(d)
    from structcov.car import SpatialGraph
    graph_p = SpatialGraph(graph.adjacency[np.ix_(perm, perm)])
    cset_p = CovariateSet(d=d, components=(build_identity(d),
                                           build_cluster_matrix(labels[perm], "blk")),
                          spatial=graph_p)
    fit_p = fit_sce(StandardizedErrors(eps[:, perm]), cset_p, theta0,
                    max_iter=2000, gtol=1e-9)
    # both runs reach the float64 precision floor near the optimum
    assert fit.grad_norm < 1e-6 and fit_p.grad_norm < 1e-6
    assert np.max(np.abs(fit.theta.free_values() - fit_p.theta.free_values())) < 1e-6


# --- fisher information and intervals ----------------------------------------

def test_fisher_near_boundary_value():
    cset = pair_set()
    theta = ParameterVector(np.array([1.0 - 1e-9, 1e-9]))
    info = fisher_information(theta, cset)
    # 1/2 tr((F1 - I)^2) = 1 at R = I
    assert info[0, 0] == pytest.approx(1.0, abs=1e-6)


def test_fisher_zero_for_degenerate_direction():
    # component equal to the identity: dR/dalpha = 0
    comps = (build_identity(3), build_cluster_matrix([0, 1, 2], "ident2"))
    cset = CovariateSet(d=3, components=comps)
    theta = ParameterVector(np.array([0.5, 0.5]))
    info = fisher_information(theta, cset)
    assert info[0, 0] == pytest.approx(0.0, abs=1e-14)


def test_confidence_interval_quantile_and_width():
    from scipy.stats import norm
    assert norm.ppf(0.975) == pytest.approx(1.959964, abs=1e-6)
    cset = pair_set()
    fit = fit_sce(StandardizedErrors(np.array([[1.0, -1.0]])), cset,
                  ParameterVector(np.array([0.5, 0.5])))
    # synthetic: identity Fisher at T=1 -> half width z
    from dataclasses import replace
    fake = replace(fit, fisher=np.eye(1), t=1)
    (name, (val, lo, hi)), = confidence_intervals(fake, level=0.95).items()
    assert hi - val == pytest.approx(1.959964, abs=1e-6)


def test_confidence_interval_singular_names_direction():
    comps = (build_identity(3), build_cluster_matrix([0, 1, 2], "flatdir"))
    cset = CovariateSet(d=3, components=comps)
    theta0 = ParameterVector(np.array([0.5, 0.5]))
    fit = fit_sce(StandardizedErrors(np.random.default_rng(0).standard_normal((5, 3))),
                  cset, theta0)
    with pytest.raises(LikelihoodError, match="flatdir"):
        confidence_intervals(fit)


def test_loglikelihood_constant_convention(rng):
    cset = identity_set(3)
    eps = rng.standard_normal((6, 3))
    fit = fit_sce(StandardizedErrors(eps), cset, ParameterVector(np.array([1.0])))
    want = sum(-0.5 * (3 * np.log(2 * np.pi) + e @ e) for e in eps)
    assert loglikelihood(fit) == pytest.approx(want, abs=1e-10)


# --- dataset -----------------------------------------------------------------

def test_dataset_empirical_standardization(rng):
    y = rng.standard_normal((12, 3)) * 2.5 + 1.0
    data = Dataset.from_observations(y)
    eps = data.standardized_errors().values
    assert np.allclose(eps.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(eps.std(axis=0, ddof=1), 1.0, atol=1e-12)


def test_dataset_known_mode_broadcast(rng):
    y = rng.standard_normal((4, 3))
    data = Dataset.from_observations(y, mu=np.zeros(3), sigma=np.full(3, 2.0))
    eps = data.standardized_errors().values
    assert np.allclose(eps, y / 2.0)


def test_dataset_rejects_bad_sigma():
    with pytest.raises(LikelihoodError):
        Dataset.from_observations(np.zeros((2, 2)), mu=np.zeros(2),
                                  sigma=np.array([1.0, 0.0]))
