"""Additive exponential series estimation of product-form densities on the ordered simplex.

The main entry points are :func:`fit` (maximum likelihood for a fixed model
index), :func:`select_weights` (convex aggregation of several fits) and the
truncation-model simulator in :mod:`aese.truncation`.
"""
from .aggregate import (AggregateDensity, CandidateGrid, aggregate_log_norm, build_candidates,
                        criterion_H, fixed_candidates, penalty, select_weights, split_sample)
from .basis import (BasisFamily, correlation_matrix, jacobi_eval, mixed_scalar_product, phi_eval,
                    phi_sup_bound, phi_sup_norm, sup_norm_constant)
from .expmodel import (ModelIndex, SeriesDensity, covariance_matrix, evaluate_state, log_normalizer,
                       moment_map, series_density)
from .metrics import (CallableDensity, KernelEstimate, integrated_squared_error, kernel_fit,
                      kl_divergence, l2_distance, score)
from .mle import FitResult, SampleError, SimplexSample, empirical_moments, fit, fit_moments
from .quadrature import (QuadratureGrid, SimplexGrid, default_grid, nested_exp_integral,
                         pair_moment, simplex_grid)
from .truncation import MODELS, TruncationModel, build_model, named_model, parse_marginal, sample

__version__ = "0.1.0"

__all__ = [
    "AggregateDensity", "CandidateGrid", "aggregate_log_norm", "build_candidates", "criterion_H",
    "fixed_candidates", "penalty", "select_weights", "split_sample",
    "BasisFamily", "correlation_matrix", "jacobi_eval", "mixed_scalar_product", "phi_eval",
    "phi_sup_bound", "phi_sup_norm", "sup_norm_constant",
    "ModelIndex", "SeriesDensity", "covariance_matrix", "evaluate_state", "log_normalizer",
    "moment_map", "series_density",
    "CallableDensity", "KernelEstimate", "integrated_squared_error", "kernel_fit", "kl_divergence",
    "l2_distance", "score",
    "FitResult", "SampleError", "SimplexSample", "empirical_moments", "fit", "fit_moments",
    "QuadratureGrid", "SimplexGrid", "default_grid", "nested_exp_integral", "pair_moment",
    "simplex_grid",
    "MODELS", "TruncationModel", "build_model", "named_model", "parse_marginal", "sample",
]
