"""Simulation and frequency-domain inference for multivariate Hawkes processes."""

from .errors import HawkesError
from .indeptest import FLAT, EPANECHNIKOV, run_independence_test
from .model import HawkesModel, KernelSpec, average_intensity, bartlett_spectral_matrix, make_parameterization
from .simulate import EventLog, SimConfig, simulate_hawkes
from .spectral import FourierGrid, finite_fourier, spectral_empirical
from .whittle import FitOptions, hawkes_mle_negloglik, mle_fit, whittle_fit, whittle_negloglik

__version__ = "0.1.0"

__all__ = [
    "EPANECHNIKOV", "FLAT", "EventLog", "FitOptions", "FourierGrid", "HawkesError", "HawkesModel",
    "KernelSpec", "SimConfig", "average_intensity", "bartlett_spectral_matrix", "finite_fourier",
    "hawkes_mle_negloglik", "make_parameterization", "mle_fit", "run_independence_test",
    "simulate_hawkes", "spectral_empirical", "whittle_fit", "whittle_negloglik",
]
