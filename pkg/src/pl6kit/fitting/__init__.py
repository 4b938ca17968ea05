"""Least-squares engine and the curve-model zoo."""

from .engine import CurveModel, FitResult, covariance_from_jacobian, finite_difference_jacobian, nlls_fit  # noqa: F401
from .models import (  # noqa: F401
    BIEXPONENTIAL,
    DAMPED_COSINE,
    ESEEM,
    LINE,
    MODELS,
    POWER_BROADENING,
    POWER_LAW,
    SATURATION,
    STRETCHED,
    VISIBILITY,
    fidelity_from_biexp,
    fit_biexponential,
    fit_damped_cosine,
    fit_eseem,
    fit_lambda_rabi,
    fit_line,
    fit_lorentzian_multiplet,
    fit_power_broadening,
    fit_power_law,
    fit_rabi_power_scaling,
    fit_saturation,
    fit_stretched_exponential,
    fit_visibility,
    lambda_rabi_model,
    larmor_guess,
    dominant_frequency,
    seed_peaks,
    lorentzian_multiplet_model,
)
from .spectrum import Spectrum  # noqa: F401
