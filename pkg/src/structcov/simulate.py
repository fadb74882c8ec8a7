"""Simulation scenarios and the estimator benchmark harness.

Two scenario families are provided: a fully simulated setting (clusters
from multinomial draws, an Erdos-Renyi spatial graph with connection
probability log(d)/d) and a structured setting whose cluster/graph layout
is frozen per dimension, mimicking cumulatively-growing regional subsets.
Replicates optionally blend in an unobserved-covariate correlation
(misspecification weight xi: 0 = model assumptions hold, 1 = the observed
covariates carry no signal) and a monotone missingness mask.  Estimators
are scored by the mean absolute error over all d^2 correlation entries.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .components import (CovariateSet, ParameterVector, assemble_correlation,
                         build_cluster_matrix, build_global_matrix, build_identity)
from .car import SpatialGraph
from .initialization import StandardizedErrors, ive, pearson_type, qp_init
from .likelihood import Dataset, fit_sce
from .rng import substream
from .shrinkage import (lambda_bootstrap, lambda_upper, nearest_pd_correlation,
                        wsce)

FSS_THETA = {"alpha": (0.05, 0.09, 0.11), "delta": 0.74, "beta": 0.982}
STRUCTURED_THETA = {"alpha": (0.11, 0.05, 0.09), "delta": 0.01, "beta": 0.35}
STRUCTURED_STRUCTURE_SEED = 20240917  # frozen stand-in structures, keyed by d only
DEFAULT_ESTIMATORS = ("pearson", "ledoit_wolf", "ive", "sce", "wsce")


class SimulationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def erdos_renyi(d, p, rng):
    """Symmetric 0/1 adjacency with i.i.d. Bernoulli(p) upper-triangle entries."""
    if not 0.0 <= p <= 1.0:
        raise SimulationError("connection probability must lie in [0, 1]")
    upper = np.triu(rng.random((d, d)) < p, 1).astype(float)
    return SpatialGraph(upper + upper.T)


def multinomial_membership(d, probs, rng):
    """i.i.d. categorical labels with the given class probabilities."""
    probs = np.asarray(probs, dtype=float)
    if abs(probs.sum() - 1.0) > 1e-9 or np.any(probs < 0):
        raise SimulationError("class probabilities must be nonnegative and sum to 1")
    return rng.choice(probs.size, size=d, p=probs)


def sample_mvn(r, t, rng):
    """t i.i.d. rows from MVN(0, R) via the Cholesky factor of R."""
    if t == 0:
        return np.zeros((0, r.shape[0]))
    chol = np.linalg.cholesky(r)
    return rng.standard_normal((t, r.shape[0])) @ chol.T


def mix_misspecification(r_model, f_miss, xi):
    """xi * R + (1 - xi) * (0.01 I + 0.99 F_miss); xi=1 returns R unchanged."""
    if not 0.0 <= xi <= 1.0:
        raise SimulationError("mixing weight must lie in [0, 1]")
    r_model = np.asarray(r_model, dtype=float)
    f_miss = np.asarray(f_miss, dtype=float)
    if r_model.shape != f_miss.shape:
        raise SimulationError("matrix shapes disagree")
    d = r_model.shape[0]
    return xi * r_model + (1.0 - xi) * (0.01 * np.eye(d) + 0.99 * f_miss)


def mae(r_true, r_est):
    """(1/d^2) sum_ij |R*_ij - Rbar_ij| on the correlation scale."""
    r_true = np.asarray(r_true, dtype=float)
    r_est = np.asarray(r_est, dtype=float)
    if r_true.shape != r_est.shape:
        raise SimulationError("matrix shapes disagree")
    return float(np.mean(np.abs(r_true - r_est)))


def ledoit_wolf(errors):
    """Shrinkage of the (centered-by-construction) sample covariance toward a
    scaled identity, returned on the correlation scale.

    Standard optimal-intensity shrinkage for i.i.d. rows; with a single
    sample the dispersion estimate is void and the estimator collapses to
    the identity correlation.
    """
    eps = errors.values if isinstance(errors, StandardizedErrors) else np.asarray(errors)
    t, d = eps.shape
    if t < 2:
        return np.eye(d)
    s = eps.T @ eps / t
    m = np.trace(s) / d
    dev = s - m * np.eye(d)
    d2 = float(np.sum(dev * dev)) / d
    if d2 <= 1e-30:
        return np.eye(d)
    b_bar = 0.0
    for row in eps:
        diff = np.outer(row, row) - s
        b_bar += float(np.sum(diff * diff)) / d
    b_bar /= t * t
    shrink = min(b_bar, d2) / d2
    sigma = shrink * m * np.eye(d) + (1.0 - shrink) * s
    scale = 1.0 / np.sqrt(np.diag(sigma))
    corr = sigma * scale[:, None] * scale[None, :]
    np.fill_diagonal(corr, 1.0)
    return corr


def monotone_mask(t, d, rng, staggered_frac=0.3):
    """Monotone missingness: late starters stay observed once they begin."""
    mask = np.ones((t, d), dtype=bool)
    if t < 2:
        return mask
    n_lagged = int(round(staggered_frac * d))
    lagged = rng.choice(d, size=n_lagged, replace=False)
    starts = rng.integers(1, max(t // 2, 2), size=n_lagged)
    for j, start in zip(lagged, starts):
        mask[:start, j] = False
    return mask


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    kind: str = "fss"  # fss | structured
    d: int = 200
    t: int = 11
    theta_star: ParameterVector | None = None
    xi: float = 0.0  # 0 = model-true, 1 = fully misspecified
    missing: str | None = None  # None | "monotone"
    known_musigma: bool = True
    seed: int = 0
    bootstrap_b: int = 100

    def __post_init__(self):
        if self.kind not in ("fss", "structured"):
            raise SimulationError("scenario kind must be 'fss' or 'structured'")
        if not 0.0 <= self.xi <= 1.0:
            raise SimulationError("xi must lie in [0, 1]")
        if self.d < 2 or self.t < 1:
            raise SimulationError("need d >= 2 and T >= 1")
        if self.theta_star is None:
            base = FSS_THETA if self.kind == "fss" else STRUCTURED_THETA
            alphas = np.array(base["alpha"])
            a0 = 1.0 - alphas.sum() - base["delta"]
            theta = ParameterVector(np.concatenate([[a0], alphas]),
                                    base["delta"], base["beta"])
            object.__setattr__(self, "theta_star", theta)


@dataclass(frozen=True)
class BenchmarkReport:
    config: ScenarioConfig
    estimators: tuple[str, ...]
    maes: dict  # estimator -> list of per-replicate MAE
    seconds: dict  # estimator -> wall times (informational, not reproducible)
    seeds: tuple[int, ...]

    def to_dict(self):
        """Deterministic report content (timings are deliberately left out)."""
        cfg = self.config
        return {
            "scenario": {
                "kind": cfg.kind, "d": cfg.d, "t": cfg.t, "xi": cfg.xi,
                "missing": cfg.missing, "known_musigma": cfg.known_musigma,
                "seed": cfg.seed,
                "theta_star": {
                    "alpha": [float(a) for a in cfg.theta_star.alpha],
                    "delta": cfg.theta_star.delta,
                    "beta": cfg.theta_star.beta,
                },
            },
            "estimators": list(self.estimators),
            "seeds": list(self.seeds),
            "mae": {name: [float(v) for v in vals] for name, vals in self.maes.items()},
        }


def scenario_structures(config, rep):
    """Cluster labels and spatial graph for one replicate.

    FSS redraws structures per replicate; the structured scenario reuses a
    frozen layout that depends only on the dimension.
    """
    d = config.d
    if config.kind == "fss":
        rng = substream(config.seed, rep, "structures")
    else:
        rng = substream(STRUCTURED_STRUCTURE_SEED, d, "structures")
    labels_a = multinomial_membership(d, np.full(3, 1 / 3), rng)
    labels_b = multinomial_membership(d, np.full(10, 0.1), rng)
    graph = erdos_renyi(d, np.log(d) / d, rng)
    return labels_a, labels_b, graph


def build_scenario_set(config, rep):
    labels_a, labels_b, graph = scenario_structures(config, rep)
    comps = (build_identity(config.d),
             build_cluster_matrix(labels_a, "comcol"),
             build_cluster_matrix(labels_b, "region"),
             build_global_matrix(config.d))
    return CovariateSet(d=config.d, components=comps, spatial=graph)


def simulate_replicate(config, rep):
    """Truth, covariate set, and data for one replicate (masked if configured)."""
    cset = build_scenario_set(config, rep)
    r_model = assemble_correlation(config.theta_star, cset)
    r_true = r_model
    if config.xi > 0.0:
        rng_m = substream(config.seed, rep, "misspec")
        f_miss = build_cluster_matrix(
            multinomial_membership(config.d, np.full(3, 1 / 3), rng_m), "miss").matrix
        r_true = mix_misspecification(r_model, f_miss, 1.0 - config.xi)
    y = sample_mvn(r_true, config.t, substream(config.seed, rep, "data"))
    mask = None
    if config.missing == "monotone":
        mask = monotone_mask(config.t, config.d, substream(config.seed, rep, "mask"))
    if config.known_musigma:
        data = Dataset.from_observations(y, mask=mask,
                                         mu=np.zeros(config.d), sigma=np.ones(config.d))
    else:
        data = Dataset.from_observations(y, mask=mask)
    return r_true, cset, data


def run_estimators(cset, data, estimators, beta_grid=None, bootstrap_b=100,
                   bootstrap_seed=0, known_musigma=True):
    """Estimate the correlation matrix with each named estimator.

    The shrinkage weight for the weighted estimator uses the closed-form
    upper bound when means/scales are external and the data are complete,
    and the parametric bootstrap otherwise (the closed form is unstable in
    exactly those situations).
    """
    errors = data.standardized_errors()
    out = {}
    times = {}
    r_pearson = None
    init = None
    fit = None

    def ensure_pearson():
        nonlocal r_pearson
        if r_pearson is None:
            r_pearson = pearson_type(errors)
        return r_pearson

    def ensure_fit():
        nonlocal init, fit
        if init is None:
            init = qp_init(ensure_pearson(), cset, beta_grid=beta_grid)
        if fit is None:
            fit = fit_sce(data, cset, init.theta0)
        return fit

    for name in estimators:
        start = time.perf_counter()
        if name == "pearson":
            est = ensure_pearson()
        elif name == "ledoit_wolf":
            est = ledoit_wolf(errors)
        elif name == "ive":
            if init is None:
                init = qp_init(ensure_pearson(), cset, beta_grid=beta_grid)
            est = ive(init.theta0, cset)
        elif name == "sce":
            est = ensure_fit().R
        elif name == "wsce":
            f = ensure_fit()
            pd_pearson = nearest_pd_correlation(ensure_pearson())
            if errors.complete and known_musigma:
                lam = lambda_upper(f, cset, pd_pearson, data.t).lam
            else:
                lam = lambda_bootstrap(f, cset, data, b=bootstrap_b,
                                       seed=bootstrap_seed).lam
            est = wsce(f.R, pd_pearson, lam)
        else:
            raise SimulationError("unknown estimator %r" % name)
        times[name] = time.perf_counter() - start
        out[name] = est
    return out, times


def run_benchmark(config, estimators=DEFAULT_ESTIMATORS, reps=40, beta_grid=None,
                  threads=1):
    """Run ``reps`` independent replicates and score every estimator by MAE.

    Fully deterministic for a fixed (config, reps): every random draw comes
    from a stream keyed by (seed, replicate, purpose), and results are
    aggregated in replicate order whatever the thread count.
    """
    estimators = tuple(estimators)

    def one(rep):
        r_true, cset, data = simulate_replicate(config, rep)
        ests, times = run_estimators(
            cset, data, estimators, beta_grid=beta_grid,
            bootstrap_b=config.bootstrap_b,
            bootstrap_seed=_bootstrap_seed(config.seed, rep),
            known_musigma=config.known_musigma)
        return {name: mae(r_true, est) for name, est in ests.items()}, times

    if threads > 1 and reps > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(reps)))
    else:
        results = [one(rep) for rep in range(reps)]

    maes = {name: [res[0][name] for res in results] for name in estimators}
    seconds = {name: [res[1][name] for res in results] for name in estimators}
    return BenchmarkReport(config=config, estimators=estimators, maes=maes,
                           seconds=seconds, seeds=tuple(range(reps)))


def _bootstrap_seed(seed, rep):
    # distinct deterministic seed per replicate for the bootstrap substreams
    return (int(seed) << 20) + int(rep)
