"""Estimating the memory parameter d of long-range dependent series with
missing values: ARFIMA simulation, gap injection and imputation, spectral,
scaling and copula-based estimators, and a Monte Carlo harness."""

__version__ = "0.1.0"

from .arfima import ArfimaModel, arfima_acvf, simulate_gaussian  # noqa: E402
from .copula import CopulaConfig, estimate_d_copula  # noqa: E402
from .gaps import GappySeries, MissingSpec, impute, inject_missing  # noqa: E402
from .results import EstimateResult, EstimationError  # noqa: E402
from .scaling import dfa_estimate, rs_estimate  # noqa: E402
from .spectral import elw, gph, local_whittle, periodogram  # noqa: E402

__all__ = [
    "ArfimaModel", "arfima_acvf", "simulate_gaussian", "CopulaConfig", "estimate_d_copula",
    "GappySeries", "MissingSpec", "impute", "inject_missing", "EstimateResult",
    "EstimationError", "dfa_estimate", "rs_estimate", "elw", "gph", "local_whittle",
    "periodogram",
]
