from .engine import FitError, FitProblem, FitResult, nlls_fit, numeric_jacobian
from .models import (
    Dip,
    GridResolutionWarning,
    IdentifiabilityWarning,
    LinearFit,
    LorentzianFit,
    StrainFit,
    exp_relaxation,
    exp_relaxation_jacobian,
    fit_exp_relaxation,
    fit_linear,
    fit_lorentzian_dips,
    fit_splitting,
    fit_strain_response,
    format_uncertainty,
    lines_jacobian,
    lines_model,
    lorentzian_dips,
    lorentzian_dips_jacobian,
    splitting_jacobian,
    splitting_model,
)

__all__ = [
    "Dip",
    "FitError",
    "FitProblem",
    "FitResult",
    "GridResolutionWarning",
    "IdentifiabilityWarning",
    "LinearFit",
    "LorentzianFit",
    "StrainFit",
    "exp_relaxation",
    "exp_relaxation_jacobian",
    "fit_exp_relaxation",
    "fit_linear",
    "fit_lorentzian_dips",
    "fit_splitting",
    "fit_strain_response",
    "format_uncertainty",
    "lines_jacobian",
    "lines_model",
    "lorentzian_dips",
    "lorentzian_dips_jacobian",
    "nlls_fit",
    "numeric_jacobian",
    "splitting_jacobian",
    "splitting_model",
]
