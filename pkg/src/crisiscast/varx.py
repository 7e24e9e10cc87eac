"""Vector autoregression with exogenous flags, fitted by least squares.

The caller prepares the inputs (log transform, seasonal differencing via
series-core); this module only sees the stationarized multivariate series.
Forecasts iterate the fitted difference equation and can be re-integrated
back to levels when the pre-differencing series are supplied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadParameter,
    GapError,
    HorizonOutOfRange,
    MissingFutureExog,
    RankDeficientDesign,
    SeriesTooShort,
)
from .series import WEEK, FlagSeries, WeeklySeries


@dataclass(frozen=True)
class MultiSeries:
    """Aligned weekly series sharing one grid (same start week and length)."""

    components: tuple[WeeklySeries, ...]

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        if not comps:
            raise BadParameter("MultiSeries needs at least one component")
        first = comps[0]
        for comp in comps[1:]:
            if comp.start_week != first.start_week or len(comp) != len(first):
                raise GapError(
                    f"series {comp.name!r} does not share the grid of {first.name!r}"
                )
        names = [c.name for c in comps]
        if len(set(names)) != len(names):
            raise BadParameter("component series names must be unique")
        object.__setattr__(self, "components", comps)

    def __len__(self) -> int:
        return len(self.components[0])

    @property
    def start_week(self):
        return self.components[0].start_week

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.components)

    def matrix(self) -> np.ndarray:
        """(n_weeks, n_series) value matrix."""
        return np.column_stack([c.values for c in self.components])

    def get(self, name: str) -> WeeklySeries:
        for comp in self.components:
            if comp.name == name:
                return comp
        raise BadParameter(f"no component named {name!r}")


@dataclass(frozen=True)
class VarxFit:
    series_names: tuple[str, ...]
    lag_order: int
    coefficient_matrices: tuple[np.ndarray, ...]  # A_1..A_p, each (m, m)
    exog_coefficients: np.ndarray  # (m, k)
    exog_names: tuple[str, ...]
    intercept: np.ndarray  # (m,)
    residual_cov: np.ndarray  # (m, m)
    spectral_radius: float
    n_obs: int

    def __post_init__(self) -> None:
        mats = tuple(np.asarray(a, dtype=float) for a in self.coefficient_matrices)
        for a in mats:
            a.setflags(write=False)
        object.__setattr__(self, "coefficient_matrices", mats)
        for name in ("exog_coefficients", "intercept", "residual_cov"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def nonstationary_warning(self) -> bool:
        return self.spectral_radius >= 1.0


@dataclass(frozen=True)
class VarxForecast:
    series_names: tuple[str, ...]
    means: tuple[tuple[float, ...], ...]  # per series, length horizon
    scale: str  # "differenced" or "level"
    variance_propagated: bool  # always False: means only
    nonstationary_warning: bool


def _companion_spectral_radius(mats: list[np.ndarray], m: int, p: int) -> float:
    comp = np.zeros((m * p, m * p))
    for i, a in enumerate(mats):
        comp[:m, i * m : (i + 1) * m] = a
    for i in range(m * (p - 1)):
        comp[m + i, i] = 1.0
    if comp.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def _exog_rows(exog: list[FlagSeries], start_week, length: int) -> tuple[np.ndarray, tuple[str, ...]]:
    cols = []
    names = []
    for flag in exog:
        if flag.start_week != start_week or len(flag) != length:
            raise GapError(f"flag {flag.name!r} is not aligned to the series grid")
        cols.append(flag.as_float())
        names.append(flag.name)
    x = np.column_stack(cols) if cols else np.empty((length, 0))
    return x, tuple(names)


def fit_varx(
    ms: MultiSeries, exog: list[FlagSeries] | None, lag_order: int = 1
) -> VarxFit:
    """Equation-by-equation OLS fit of a VAR(p) with exogenous flags."""
    if not isinstance(lag_order, (int, np.integer)) or not 1 <= lag_order <= 4:
        raise BadParameter("lag_order must be an integer in 1..4")
    if len(ms.components) < 2:
        raise BadParameter("varx needs at least 2 component series")
    y = ms.matrix()
    if not np.all(np.isfinite(y)):
        raise BadParameter("series contain non-finite values")
    n, m = y.shape
    exog = list(exog or [])
    x_all, exog_names = _exog_rows(exog, ms.start_week, n)
    k = x_all.shape[1]
    p = int(lag_order)
    n_eff = n - p
    n_params = m * p + k + 1
    if n_eff < n_params + 10:
        raise SeriesTooShort(
            f"need at least {n_params + 10} usable rows after {p} lags, have {n_eff}"
        )

    design_cols = [np.ones(n_eff)]
    for lag in range(1, p + 1):
        design_cols.append(y[p - lag : n - lag])
    design_cols.append(x_all[p:])
    design = np.column_stack(design_cols)
    target = y[p:]

    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        raise RankDeficientDesign(
            f"design matrix rank {rank} < {design.shape[1]} columns"
        )
    coeffs, *_ = np.linalg.lstsq(design, target, rcond=None)
    # coeffs rows: [intercept, y lags (p blocks of m), exog (k)] per equation col
    intercept = coeffs[0]
    mats = []
    for lag in range(p):
        block = coeffs[1 + lag * m : 1 + (lag + 1) * m]
        mats.append(block.T.copy())  # A_lag[i, j]: effect of series j on equation i
    exog_coeffs = coeffs[1 + p * m :].T.copy() if k else np.empty((m, 0))

    residuals = target - design @ coeffs
    denom = n_eff - n_params
    if denom <= 0:
        raise SeriesTooShort("no degrees of freedom left for the residual covariance")
    residual_cov = residuals.T @ residuals / denom

    return VarxFit(
        series_names=ms.names,
        lag_order=p,
        coefficient_matrices=tuple(mats),
        exog_coefficients=exog_coeffs,
        exog_names=exog_names,
        intercept=intercept.copy(),
        residual_cov=residual_cov,
        spectral_radius=_companion_spectral_radius(mats, m, p),
        n_obs=n_eff,
    )


def forecast_varx(
    fit: VarxFit,
    ms: MultiSeries,
    exog_future: list[FlagSeries] | None,
    horizon: int,
    levels: MultiSeries | None = None,
    seasonal_lag: int = 52,
) -> VarxForecast:
    """Iterated mean forecasts of the fitted system.

    `ms` is the differenced multiseries the model was fitted on. When
    `levels` carries the pre-differencing series, forecasts are
    re-integrated (undifferenced at `seasonal_lag`, then exponentiated for
    log-scale components). Only means are propagated; no variances.
    """
    if not isinstance(horizon, (int, np.integer)) or horizon < 1:
        raise HorizonOutOfRange("horizon must be a positive integer")
    if ms.names != fit.series_names:
        raise BadParameter(
            f"multiseries components {list(ms.names)} do not match fit {list(fit.series_names)}"
        )
    m = len(fit.series_names)
    p = fit.lag_order
    y = ms.matrix()
    if y.shape[0] < p:
        raise SeriesTooShort(f"need at least {p} trailing observations")

    future = {f.name: f for f in (exog_future or [])}
    expected_start = ms.components[0].end_week + WEEK
    x_future = np.empty((horizon, len(fit.exog_names)))
    for j, name in enumerate(fit.exog_names):
        flag = future.get(name)
        if flag is None:
            raise MissingFutureExog(f"no future values for flag {name!r}")
        if flag.start_week != expected_start or len(flag) < horizon:
            raise MissingFutureExog(
                f"future flag {name!r} must cover {horizon} weeks from "
                f"{expected_start.isoformat()}"
            )
        x_future[:, j] = flag.as_float()[:horizon]

    history = [y[-lag] for lag in range(1, p + 1)]  # most recent first
    out = np.empty((horizon, m))
    for h in range(horizon):
        value = fit.intercept.copy()
        for lag in range(p):
            value = value + fit.coefficient_matrices[lag] @ history[lag]
        if fit.exog_names:
            value = value + fit.exog_coefficients @ x_future[h]
        out[h] = value
        history = [value] + history[: p - 1]

    scale = "differenced"
    if levels is not None:
        if levels.names != fit.series_names:
            raise BadParameter("levels components must match the fitted series")
        if len(levels) < seasonal_lag:
            raise SeriesTooShort(
                f"levels need at least {seasonal_lag} observations to re-integrate"
            )
        rebuilt = np.empty_like(out)
        for j, comp in enumerate(levels.components):
            vals = list(comp.values)
            for h in range(horizon):
                prev = vals[len(comp.values) - seasonal_lag + h] if h < seasonal_lag else rebuilt[
                    h - seasonal_lag, j
                ]
                rebuilt[h, j] = out[h, j] + prev
            if comp.transform == "log":
                rebuilt[:, j] = np.exp(rebuilt[:, j])
        out = rebuilt
        scale = "level"

    return VarxForecast(
        series_names=fit.series_names,
        means=tuple(tuple(float(v) for v in out[:, j]) for j in range(m)),
        scale=scale,
        variance_propagated=False,
        nonstationary_warning=fit.nonstationary_warning,
    )
