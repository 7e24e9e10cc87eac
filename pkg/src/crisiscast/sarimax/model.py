"""SARIMAX estimation and forecasting.

Estimation works on the (d, D)-differenced series. Exogenous flags are
handled by iterated feasible GLS: ordinary least squares first, then an
ARMA fit on the residuals, then a re-estimate of the betas by weighted
regression on Kalman-whitened innovations, repeated twice. The intercept
is only estimated when no differencing is applied (d + D = 0), since
differencing removes the level.

Forecasting subtracts the regression effects in levels, differences,
predicts in the ARMA state space, re-integrates the means through the
differencing operators, and maps the forecast covariance back to levels
with the integration-weight matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtri

from ..errors import (
    BadParameter,
    DegenerateExog,
    GapError,
    HorizonOutOfRange,
    MissingFutureExog,
    NonConvergence,
    NonStationaryParams,
    SeriesTooShort,
    TauOutOfRange,
)
from ..series import WEEK, FlagSeries, WeeklySeries, difference
from .kalman import ArmaKalman, FilterFailure
from .params import (
    ParamLayout,
    SarimaOrder,
    SarimaxParams,
    expand_polynomials,
    integration_weights,
    validate_stationarity,
)

SIMPLEX_TOL = 1e-8
MAX_ITERATIONS = 2000
N_RESTARTS = 3
GLS_ROUNDS = 2
_RESTART_SEED = 20200312  # fixed: fit must be deterministic


@dataclass(frozen=True)
class FitConfig:
    simplex_tol: float = SIMPLEX_TOL
    max_iterations: int = MAX_ITERATIONS
    n_restarts: int = N_RESTARTS
    # kappa for diffuse states; integration is handled by explicit
    # differencing so the stationary initializer normally suffices
    diffuse_kappa: float = 1e7


@dataclass(frozen=True)
class FittedSarimax:
    order: SarimaOrder
    ar_coeffs: tuple[float, ...]
    ma_coeffs: tuple[float, ...]
    seasonal_ar_coeffs: tuple[float, ...]
    seasonal_ma_coeffs: tuple[float, ...]
    intercept: float
    exog_betas: tuple[float, ...]
    exog_names: tuple[str, ...]
    sigma2: float
    loglik: float
    aicc: float
    n_obs: int
    transform: str
    converged: bool

    @property
    def k_free(self) -> int:
        """Free parameters excluding the innovation variance."""
        return (
            self.order.n_arma_params
            + len(self.exog_betas)
            + (1 if self.order.d + self.order.D == 0 else 0)
        )

    def params(self) -> SarimaxParams:
        return SarimaxParams(
            ar=self.ar_coeffs,
            ma=self.ma_coeffs,
            seasonal_ar=self.seasonal_ar_coeffs,
            seasonal_ma=self.seasonal_ma_coeffs,
            intercept=self.intercept,
            betas=self.exog_betas,
            sigma2=self.sigma2,
        )

    def to_json(self) -> str:
        doc = {
            "format": "crisiscast.sarimax",
            "version": 1,
            "order": list(self.order.as_tuple()),
            "ar_coeffs": list(self.ar_coeffs),
            "ma_coeffs": list(self.ma_coeffs),
            "seasonal_ar_coeffs": list(self.seasonal_ar_coeffs),
            "seasonal_ma_coeffs": list(self.seasonal_ma_coeffs),
            "intercept": self.intercept,
            "exog_betas": list(self.exog_betas),
            "exog_names": list(self.exog_names),
            "sigma2": self.sigma2,
            "loglik": self.loglik,
            "aicc": self.aicc,
            "n_obs": self.n_obs,
            "transform": self.transform,
            "converged": self.converged,
        }
        # json emits shortest-round-trip decimal floats, so the document is
        # lossless at full double precision
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FittedSarimax":
        doc = json.loads(text)
        if doc.get("format") != "crisiscast.sarimax" or doc.get("version") != 1:
            raise BadParameter("not a version-1 fitted-model document")
        return cls(
            order=SarimaOrder(*doc["order"]),
            ar_coeffs=tuple(doc["ar_coeffs"]),
            ma_coeffs=tuple(doc["ma_coeffs"]),
            seasonal_ar_coeffs=tuple(doc["seasonal_ar_coeffs"]),
            seasonal_ma_coeffs=tuple(doc["seasonal_ma_coeffs"]),
            intercept=float(doc["intercept"]),
            exog_betas=tuple(doc["exog_betas"]),
            exog_names=tuple(doc["exog_names"]),
            sigma2=float(doc["sigma2"]),
            loglik=float(doc["loglik"]),
            aicc=float(doc["aicc"]),
            n_obs=int(doc["n_obs"]),
            transform=doc["transform"],
            converged=bool(doc["converged"]),
        )


@dataclass(frozen=True)
class ForecastDistribution:
    horizon: int
    means: tuple[float, ...]
    variances: tuple[float, ...]
    transform_tag: str

    def __post_init__(self) -> None:
        if len(self.means) != self.horizon or len(self.variances) != self.horizon:
            raise BadParameter("means/variances length must equal horizon")
        if any(v < 0.0 for v in self.variances):
            raise BadParameter("variances must be non-negative")


def quantile(f: ForecastDistribution, h: int, tau: float) -> float:
    """tau-quantile of the h-step-ahead predictive distribution (h is 1-based)."""
    if not isinstance(h, (int, np.integer)) or not 1 <= h <= f.horizon:
        raise HorizonOutOfRange(f"h must be in 1..{f.horizon}")
    if not 0.0 < tau < 1.0:
        raise TauOutOfRange("tau must lie strictly inside (0, 1)")
    value = f.means[h - 1] + float(ndtri(tau)) * math.sqrt(f.variances[h - 1])
    return math.exp(value) if f.transform_tag == "log" else value


# ----------------------------------------------------------- internals


def _apply_differencing(values: np.ndarray, order: SarimaOrder) -> np.ndarray:
    out = np.asarray(values, dtype=float)
    for _ in range(order.d):
        out = difference(out, 1)
    for _ in range(order.D):
        out = difference(out, order.s)
    return out


def _exog_matrix(y: WeeklySeries, exog: list[FlagSeries]) -> tuple[np.ndarray, tuple[str, ...]]:
    names = []
    cols = []
    for flag in exog:
        if flag.start_week != y.start_week or len(flag) != len(y):
            raise GapError(
                f"flag {flag.name!r} is not aligned to series {y.name!r}"
            )
        names.append(flag.name)
        cols.append(flag.as_float())
    if len(set(names)) != len(names):
        raise BadParameter("exogenous flag names must be unique")
    x = np.column_stack(cols) if cols else np.empty((len(y), 0))
    return x, tuple(names)


def _arma_mle(
    w: np.ndarray,
    order: SarimaOrder,
    config: FitConfig,
    x0: np.ndarray | None = None,
) -> tuple[SarimaxParams, float, float, bool]:
    """Maximize the concentrated likelihood over the ARMA blocks.

    Returns (params with sigma2 filled, loglik, sigma2, converged).
    """
    layout = ParamLayout(order)
    if layout.size == 0:
        kalman = ArmaKalman(np.zeros(0), np.zeros(0))
        try:
            loglik, sigma2 = kalman.filter(w).concentrated_loglik()
        except FilterFailure as exc:
            raise NonConvergence(
                f"degenerate data for order {order.as_tuple()}: {exc}"
            ) from exc
        return SarimaxParams(sigma2=sigma2), loglik, sigma2, True

    def negative_loglik(z: np.ndarray) -> float:
        blocks = layout.to_coeff_blocks(z)
        probe = SarimaxParams(sigma2=1.0, **blocks)
        ar_full, ma_full = expand_polynomials(order, probe)
        try:
            loglik, _ = ArmaKalman(ar_full, ma_full).filter(w).concentrated_loglik()
        except FilterFailure:
            return 1e12
        if not math.isfinite(loglik):
            return 1e12
        return -loglik

    rng = np.random.default_rng(_RESTART_SEED)
    start = np.zeros(layout.size) if x0 is None else np.asarray(x0, dtype=float)
    best = None
    for attempt in range(config.n_restarts + 1):
        result = minimize(
            negative_loglik,
            start,
            method="Nelder-Mead",
            options={
                "xatol": config.simplex_tol,
                "fatol": config.simplex_tol,
                "maxiter": config.max_iterations,
                "maxfev": 4 * config.max_iterations,
            },
        )
        if best is None or result.fun < best.fun:
            best = result
        if result.success and result.fun < 1e11:
            break
        start = rng.normal(0.0, 0.4, size=layout.size)
    else:
        if not best.success or best.fun >= 1e11:
            raise NonConvergence(
                f"optimizer exhausted {config.n_restarts} restarts for order {order.as_tuple()}"
            )
    blocks = layout.to_coeff_blocks(best.x)
    probe = SarimaxParams(sigma2=1.0, **blocks)
    ar_full, ma_full = expand_polynomials(order, probe)
    loglik, sigma2 = ArmaKalman(ar_full, ma_full).filter(w).concentrated_loglik()
    params = SarimaxParams(sigma2=sigma2, **blocks)
    return params, loglik, sigma2, bool(best.success)


def _warm_start(params: SarimaxParams, order: SarimaOrder) -> np.ndarray | None:
    # boundary-adjacent coefficients have no finite unconstrained image
    try:
        return ParamLayout(order).from_coeff_blocks(params)
    except NonStationaryParams:
        return None


def _whitened_betas(
    w_y: np.ndarray, w_x: np.ndarray, params: SarimaxParams, order: SarimaOrder
) -> np.ndarray:
    """GLS step: regress Kalman-whitened y innovations on whitened columns."""
    ar_full, ma_full = expand_polynomials(order, params)
    kalman = ArmaKalman(ar_full, ma_full)
    res_y = kalman.filter(w_y, collect_innovations=True)
    weights = 1.0 / np.sqrt(res_y.innovation_vars)
    lhs = res_y.innovations * weights
    cols = []
    for j in range(w_x.shape[1]):
        res_c = kalman.filter(np.ascontiguousarray(w_x[:, j]), collect_innovations=True)
        cols.append(res_c.innovations * weights)
    design = np.column_stack(cols)
    beta, *_ = np.linalg.lstsq(design, lhs, rcond=None)
    return beta


def fit(
    y: WeeklySeries,
    exog: list[FlagSeries] | None,
    order: SarimaOrder,
    config: FitConfig | None = None,
) -> FittedSarimax:
    """Gaussian maximum-likelihood fit of the model to a weekly series."""
    config = config or FitConfig()
    exog = list(exog or [])
    x_levels, names = _exog_matrix(y, exog)
    w_y = _apply_differencing(y.values, order)
    w_x = np.column_stack(
        [_apply_differencing(x_levels[:, j], order) for j in range(x_levels.shape[1])]
    ) if x_levels.shape[1] else np.empty((w_y.size, 0))

    with_intercept = order.d + order.D == 0
    if with_intercept:
        w_x = np.column_stack([np.ones(w_y.size), w_x])

    n = w_y.size
    k_regression = w_x.shape[1]
    k_free = order.n_arma_params + k_regression
    if n < k_free + 5:
        raise SeriesTooShort(
            f"need at least {k_free + 5} differenced observations, have {n}"
        )
    if k_regression:
        for j in range(int(with_intercept), k_regression):
            if np.all(w_x[:, j] == 0.0):
                label = names[j - int(with_intercept)]
                raise DegenerateExog(f"flag {label!r} is zero after differencing")
        if np.linalg.matrix_rank(w_x) < k_regression:
            raise DegenerateExog("regression design is rank deficient")

    if k_regression:
        beta, *_ = np.linalg.lstsq(w_x, w_y, rcond=None)
        warm: np.ndarray | None = None
        for _ in range(GLS_ROUNDS):
            params, loglik, sigma2, converged = _arma_mle(
                w_y - w_x @ beta, order, config, warm
            )
            warm = _warm_start(params, order)
            if order.n_arma_params:
                beta = _whitened_betas(w_y, w_x, params, order)
        params, loglik, sigma2, converged = _arma_mle(w_y - w_x @ beta, order, config, warm)
        intercept = float(beta[0]) if with_intercept else 0.0
        betas = tuple(float(b) for b in beta[int(with_intercept):])
    else:
        params, loglik, sigma2, converged = _arma_mle(w_y, order, config)
        intercept = 0.0
        betas = ()

    k_aicc = k_free + 1  # + innovation variance
    from ..autoorder import aicc as aicc_value

    return FittedSarimax(
        order=order,
        ar_coeffs=params.ar,
        ma_coeffs=params.ma,
        seasonal_ar_coeffs=params.seasonal_ar,
        seasonal_ma_coeffs=params.seasonal_ma,
        intercept=intercept,
        exog_betas=betas,
        exog_names=names,
        sigma2=sigma2,
        loglik=loglik,
        aicc=aicc_value(loglik, k_aicc, n),
        n_obs=n,
        transform=y.transform,
        converged=converged,
    )


def loglikelihood(
    y: WeeklySeries,
    exog: list[FlagSeries] | None,
    order: SarimaOrder,
    params: SarimaxParams,
) -> float:
    """Exact Gaussian log-likelihood at an explicit parameter point."""
    exog = list(exog or [])
    x_levels, _ = _exog_matrix(y, exog)
    params.check_matches(order, x_levels.shape[1])
    validate_stationarity(order, params)
    adjusted = y.values - params.intercept
    if x_levels.shape[1]:
        adjusted = adjusted - x_levels @ np.asarray(params.betas)
    w = _apply_differencing(adjusted, order)
    ar_full, ma_full = expand_polynomials(order, params)
    try:
        result = ArmaKalman(ar_full, ma_full).filter(w)
    except FilterFailure as exc:
        raise NonConvergence(f"likelihood evaluation failed: {exc}") from exc
    return result.loglik_at(params.sigma2)


def fitted_values(
    m: FittedSarimax,
    y: WeeklySeries,
    exog: list[FlagSeries] | None,
) -> np.ndarray:
    """One-step-ahead in-sample predictions on the level scale.

    Entry t is the actual value minus the filter innovation for week t, i.e.
    the model's forecast of week t given everything before it. Entries
    consumed by differencing start-up are NaN. Log-fitted models are
    exponentiated back to levels.
    """
    order = m.order
    exog = list(exog or [])
    x_levels, names = _exog_matrix(y, exog)
    if names != m.exog_names:
        raise MissingFutureExog(
            f"model was fitted with flags {list(m.exog_names)}, got {list(names)}"
        )
    betas = np.asarray(m.exog_betas)
    adjusted = y.values - m.intercept
    if betas.size:
        adjusted = adjusted - x_levels @ betas
    w = _apply_differencing(adjusted, order)
    if w.size != m.n_obs:
        raise BadParameter(
            f"series yields {w.size} differenced observations, model was fitted on {m.n_obs}"
        )
    ar_full, ma_full = expand_polynomials(order, m.params())
    try:
        result = ArmaKalman(ar_full, ma_full).filter(w, collect_innovations=True)
    except FilterFailure as exc:
        raise NonConvergence(f"in-sample filtering failed: {exc}") from exc
    out = np.full(y.values.size, np.nan)
    offset = y.values.size - w.size
    out[offset:] = y.values[offset:] - result.innovations
    if m.transform == "log":
        out = np.exp(out)
    return out


def forecast(
    m: FittedSarimax,
    y: WeeklySeries,
    exog: list[FlagSeries] | None,
    exog_future: list[FlagSeries] | None,
    horizon: int,
) -> ForecastDistribution:
    """Predictive means and variances `horizon` weeks past the end of y.

    `exog` must be the training flags (aligned to y) for every regressor the
    model was fitted with; `exog_future` supplies their next `horizon` values
    starting the week after y ends.
    """
    if not isinstance(horizon, (int, np.integer)) or horizon < 1:
        raise HorizonOutOfRange("horizon must be a positive integer")
    order = m.order
    exog = list(exog or [])
    x_levels, names = _exog_matrix(y, exog)
    if names != m.exog_names:
        raise MissingFutureExog(
            f"model was fitted with flags {list(m.exog_names)}, got {list(names)}"
        )
    future = {f.name: f for f in (exog_future or [])}
    x_future = np.empty((horizon, len(m.exog_names)))
    expected_start = y.end_week + WEEK
    for j, name in enumerate(m.exog_names):
        flag = future.get(name)
        if flag is None:
            raise MissingFutureExog(f"no future values for flag {name!r}")
        if flag.start_week != expected_start or len(flag) < horizon:
            raise MissingFutureExog(
                f"future flag {name!r} must cover {horizon} weeks from "
                f"{expected_start.isoformat()}"
            )
        x_future[:, j] = flag.as_float()[:horizon]

    betas = np.asarray(m.exog_betas)
    adjusted = y.values - m.intercept
    if betas.size:
        adjusted = adjusted - x_levels @ betas
    w = _apply_differencing(adjusted, order)
    if w.size != m.n_obs:
        raise BadParameter(
            f"series yields {w.size} differenced observations, model was fitted on {m.n_obs}"
        )

    ar_full, ma_full = expand_polynomials(order, m.params())
    kalman = ArmaKalman(ar_full, ma_full)
    try:
        state = kalman.filter(w)
    except FilterFailure as exc:
        raise NonConvergence(f"state reconstruction failed: {exc}") from exc
    w_means, w_cov = kalman.forecast_moments(
        state.predicted_state, state.predicted_cov, horizon
    )
    w_cov = w_cov * m.sigma2

    # means: undo seasonal differencing first (it was applied last), then
    # the regular differences, anchoring on the adjusted-series history
    histories = [np.asarray(adjusted, dtype=float)]
    for _ in range(order.d):
        histories.append(difference(histories[-1], 1))
    for _ in range(order.D):
        histories.append(difference(histories[-1], order.s))
    means = w_means
    lags = [1] * order.d + [order.s] * order.D
    for level in range(len(lags) - 1, -1, -1):
        means = _reintegrate(means, histories[level], lags[level])

    psi = integration_weights(order.d, order.D, order.s, horizon)
    c = np.zeros((horizon, horizon))
    for i in range(horizon):
        c[i, : i + 1] = psi[: i + 1][::-1]
    y_cov = c @ w_cov @ c.T
    variances = np.maximum(np.diag(y_cov), 0.0)

    means = means + m.intercept
    if betas.size:
        means = means + x_future @ betas
    return ForecastDistribution(
        horizon=int(horizon),
        means=tuple(float(v) for v in means),
        variances=tuple(float(v) for v in variances),
        transform_tag=m.transform,
    )


def _reintegrate(fc: np.ndarray, history: np.ndarray, lag: int) -> np.ndarray:
    out = np.empty(fc.size)
    n = history.size
    for h in range(1, fc.size + 1):
        prev = history[n - lag + h - 1] if h <= lag else out[h - lag - 1]
        out[h - 1] = fc[h - 1] + prev
    return out
