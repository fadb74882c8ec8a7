"""Structured correlation/covariance estimation with pairwise and spatial covariates."""

from .car import SpatialGraph, SpectralGraphCache, car_correlation, decompose
from .components import (ClusterCovariate, ComponentMatrix, CovariateSet,
                         ParameterVector, assemble_correlation,
                         build_cluster_matrix, build_global_matrix,
                         build_identity, hadamard_interaction)
from .identify import IdentifiabilityReport, check_identifiability
from .initialization import InitResult, StandardizedErrors, ive, pearson_type, qp_init
from .likelihood import (Dataset, FitResult, confidence_intervals,
                         fisher_information, fit_sce, gradient_l, objective_l,
                         objective_l_missing)
from .selection import average_effects, bic, enumerate_models, select_best
from .shrinkage import (ShrinkageEstimate, lambda_bootstrap, lambda_closed_form,
                        nearest_pd_correlation, wsce)
from .simulate import (BenchmarkReport, ScenarioConfig, erdos_renyi, ledoit_wolf,
                       mae, mix_misspecification, multinomial_membership,
                       run_benchmark, sample_mvn)

__version__ = "0.1.0"
