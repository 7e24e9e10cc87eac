"""SARIMAX state-space estimation and forecasting."""

from .kalman import ArmaKalman, FilterFailure
from .model import (
    FitConfig,
    FittedSarimax,
    ForecastDistribution,
    fit,
    fitted_values,
    forecast,
    loglikelihood,
    quantile,
)
from .params import (
    ParamLayout,
    SarimaOrder,
    SarimaxParams,
    expand_polynomials,
    integration_weights,
    validate_stationarity,
)

__all__ = [
    "ArmaKalman",
    "FilterFailure",
    "FitConfig",
    "FittedSarimax",
    "ForecastDistribution",
    "ParamLayout",
    "SarimaOrder",
    "SarimaxParams",
    "expand_polynomials",
    "fit",
    "fitted_values",
    "forecast",
    "integration_weights",
    "loglikelihood",
    "quantile",
    "validate_stationarity",
]
