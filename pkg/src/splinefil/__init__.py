"""Bayesian tensor-product spline regression with filament (ridge) extraction and credible sets."""

__version__ = "0.1.0"

from .bspline import BasisSpec, KnotVector, basis_matrix, design_matrix, eval_tensor, make_spec, make_uniform_knots
from .errors import (
    ConfigError, DataError, DomainError, EmptySetError, EstimationError, InvalidSpecError, NumericalError,
    SplineFilError, UnsupportedDerivativeError,
)
from .field import ScalarField, eigen_frame, eigen_min, ridge_residual
from .metrics import directed_distance, hausdorff
from .posterior import FittedPosterior, PriorSpec, default_prior, fit, log_model_score, sample_theta, select_j
from .ridge import Filament, ScmsConfig, hitting_time, scms, trace_integral_curve
from .synth import AnalyticField, generate, paper_surface, quadratic_field, reference_filament
from .uncertainty import (
    CredibleSpec, credible_filaments, estimate_c_over_eta, estimate_r_quantiles, in_band, in_hausdorff_ball,
)

__all__ = [
    "AnalyticField", "BasisSpec", "ConfigError", "CredibleSpec", "DataError", "DomainError", "EmptySetError",
    "EstimationError", "Filament", "FittedPosterior", "InvalidSpecError", "KnotVector", "NumericalError",
    "PriorSpec", "ScalarField", "ScmsConfig", "SplineFilError", "UnsupportedDerivativeError",
    "basis_matrix", "credible_filaments", "default_prior", "design_matrix", "directed_distance",
    "eigen_frame", "eigen_min", "estimate_c_over_eta", "estimate_r_quantiles", "eval_tensor", "fit",
    "generate", "hausdorff", "hitting_time", "in_band", "in_hausdorff_ball", "log_model_score",
    "make_spec", "make_uniform_knots", "paper_surface", "quadratic_field", "reference_filament",
    "ridge_residual", "sample_theta", "scms", "select_j", "trace_integral_curve",
]
