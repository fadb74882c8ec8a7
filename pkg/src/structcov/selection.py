"""BIC model selection over admissible component subsets and average effects.

Candidate models are all subsets of the non-identity components (identity
always stays in; the empty identity-only model is excluded) that satisfy
the interaction hierarchy rule: an interaction enters only when both of
its parents are in.  Each candidate is scored by

    BIC(J) = -2 log L_J + (|J| + G * [spatial in J]) * log T,

with |J| the number of non-identity components (the spatial effect counts
once for its weight, plus G shape parameters).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import car
from .initialization import pearson_type, qp_init
from .likelihood import fit_sce, loglikelihood

SPATIAL = "spatial"


@dataclass(frozen=True)
class ModelCandidate:
    index_set: tuple[str, ...]
    bic: float
    fit: object
    converged: bool

    @property
    def n_params(self):
        return len(self.index_set)


@dataclass(frozen=True)
class AverageEffects:
    """Average correlation contributed by each effect.

    Direct (cluster/global) effects report their weight; spatial and
    spatial-interaction effects report the mean fitted contribution over
    the variable pairs they touch.
    """

    effects: dict

    def __getitem__(self, name):
        return self.effects[name]


def enumerate_models(cset):
    """All admissible index sets in lexicographic component order."""
    names = cset.component_names()[1:]  # drop identity
    if cset.has_spatial and SPATIAL not in names:
        names.append(SPATIAL)
    parents = {c.name: c.parents for c in cset.components if c.parents is not None}
    models = []
    for r in range(1, len(names) + 1):
        for picked in combinations(range(len(names)), r):
            chosen = [names[i] for i in picked]
            ok = all(p in chosen for n in chosen if n in parents for p in parents[n])
            if ok:
                models.append(tuple(chosen))
    return models


def bic(fit, index_set, t, g=1):
    """Bayesian information criterion for a fitted restricted model."""
    spatial_in = SPATIAL in index_set
    n_linear = len(index_set)
    penalty = (n_linear + (g if spatial_in else 0)) * np.log(t)
    return float(-2.0 * loglikelihood(fit) + penalty)


def select_best(data, cset, beta_grid=None, reference=None, g=1):
    """Fit every enumerated candidate and rank by BIC (ascending).

    ``reference`` names an index set whose BIC anchors the centered scores
    (defaults to the model with every main effect and no interactions).
    Non-convergent candidates keep their best achieved BIC and are flagged.
    """
    errors = data.standardized_errors() if hasattr(data, "standardized_errors") else data
    r_hat = pearson_type(errors)
    candidates = []
    for index_set in enumerate_models(cset):
        sub = cset.restrict(index_set)
        init = qp_init(r_hat, sub, beta_grid=beta_grid)
        fit = fit_sce(errors, sub, init.theta0)
        candidates.append(ModelCandidate(
            index_set=index_set,
            bic=bic(fit, index_set, fit.t, g=g),
            fit=fit,
            converged=fit.converged,
        ))
    candidates.sort(key=lambda c: (c.bic, c.index_set))

    if reference is None:
        interaction_names = {c.name for c in cset.components if c.parents is not None}
        reference = tuple(n for n in cset.component_names()[1:]
                          if n not in interaction_names)
    ref_sorted = tuple(sorted(reference))
    ref_bic = next((c.bic for c in candidates if tuple(sorted(c.index_set)) == ref_sorted),
                   candidates[0].bic)
    centered = [(c, c.bic - ref_bic) for c in candidates]
    return candidates, centered


def average_effects(theta, cset):
    """Per-effect average correlations for a fitted parameter vector."""
    effects = {}
    adjacency = cset.spatial.adjacency if cset.has_spatial else None
    gamma = car.car_correlation(cset.cache, theta.beta) if cset.has_spatial else None
    off = ~np.eye(cset.d, dtype=bool)

    effects["intercept"] = float(theta.alpha[0])
    for a_k, comp in zip(theta.alpha[1:], cset.components[1:]):
        if comp.spatial_dependent:
            # mean interaction contribution over adjacent pairs inside the mask
            sel = off & (adjacency == 1) & (comp.mask != 0)
            denom = sel.sum()
            value = float((a_k * (comp.mask * gamma))[sel].sum() / denom) if denom else 0.0
            effects[comp.name] = value
        else:
            effects[comp.name] = float(a_k)
    if cset.has_spatial:
        sel = off & (adjacency == 1)
        denom = sel.sum()
        effects[SPATIAL] = float((theta.delta * gamma)[sel].sum() / denom) if denom else 0.0
    return AverageEffects(effects=effects)
