"""Error metrics, baseline forecasters, the trailing-YoY benchmark, and
rolling-origin backtesting.

Backtest folds always train on a contiguous prefix and test on the block
immediately after it; the fold layout is validated up front so a plan that
would ever peek past the end of the series is rejected before any fitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadParameter,
    HorizonOutOfRange,
    PlanTooLarge,
    SeriesTooShort,
    TauOutOfRange,
    ZeroActual,
    ZeroLagValue,
)
from .series import WEEK, FlagSeries, WeeklySeries

MOVING_AVERAGE_WINDOWS = (2, 3, 4, 7)


@dataclass(frozen=True)
class EvaluationPair:
    actual: np.ndarray
    predicted: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.actual, dtype=float)
        f = np.asarray(self.predicted, dtype=float)
        if a.ndim != 1 or f.ndim != 1 or a.size == 0 or a.size != f.size:
            raise BadParameter("actual and predicted must be equal-length non-empty vectors")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(f))):
            raise BadParameter("actual and predicted must be finite")
        a.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "actual", a)
        object.__setattr__(self, "predicted", f)

    def __len__(self) -> int:
        return int(self.actual.size)


def mape(pair: EvaluationPair) -> float:
    """Mean absolute percentage error, in percent."""
    zero = np.flatnonzero(pair.actual == 0.0)
    if zero.size:
        raise ZeroActual(f"actual value is zero at index {int(zero[0])}")
    return float(np.mean(np.abs((pair.actual - pair.predicted) / pair.actual))) * 100.0


def rmse(pair: EvaluationPair) -> float:
    err = pair.actual - pair.predicted
    return float(math.sqrt(np.mean(err * err)))


def pinball(pair: EvaluationPair, tau: float) -> float:
    """Quantile (pinball) loss at level tau."""
    if not 0.0 < tau < 1.0:
        raise TauOutOfRange("tau must lie strictly inside (0, 1)")
    diff = pair.actual - pair.predicted
    losses = np.where(diff >= 0.0, tau * diff, (tau - 1.0) * diff)
    return float(np.mean(losses))


def trailing_yoy_benchmark(y: WeeklySeries, horizon: int) -> list[float]:
    """Scale last year's path by the mean of the last 12 year-over-year ratios.

    Past the first 52 forecast weeks the benchmark feeds on its own output
    (forecast[h] = g * forecast[h - 52]).
    """
    if not isinstance(horizon, (int, np.integer)) or horizon < 1:
        raise HorizonOutOfRange("horizon must be a positive integer")
    values = y.values
    if values.size < 64:
        raise SeriesTooShort("trailing-YoY benchmark needs at least 64 observations")
    tail = values[-12:]
    base = values[-64:-52]
    if np.any(base == 0.0):
        raise ZeroLagValue("year-ago value is zero inside the trailing window")
    g = float(np.mean(tail / base))
    extended = list(values)
    out = []
    for _ in range(horizon):
        out.append(g * extended[len(extended) - 52])
        extended.append(out[-1])
    return out


def baseline_forecast(
    y: WeeklySeries,
    method: str,
    horizon: int,
    window: int | None = None,
    alpha: float | None = None,
) -> list[float]:
    """Reference forecasters: naive, seasonal_naive, moving_average, ses."""
    if not isinstance(horizon, (int, np.integer)) or horizon < 1:
        raise HorizonOutOfRange("horizon must be a positive integer")
    values = y.values
    if method == "naive":
        return [float(values[-1])] * horizon
    if method == "seasonal_naive":
        if values.size < 52:
            raise SeriesTooShort("seasonal_naive needs at least 52 observations")
        extended = list(values)
        out = []
        for _ in range(horizon):
            out.append(float(extended[len(extended) - 52]))
            extended.append(out[-1])
        return out
    if method == "moving_average":
        if window is None:
            raise BadParameter("moving_average needs a window")
        if not isinstance(window, (int, np.integer)) or window < 1:
            raise BadParameter("moving_average window must be a positive integer")
        if values.size < window:
            raise SeriesTooShort(f"moving_average({window}) needs {window} observations")
        return [float(np.mean(values[-window:]))] * horizon
    if method == "ses":
        if alpha is None:
            raise BadParameter("ses needs a smoothing parameter alpha")
        if not 0.0 < alpha <= 1.0:
            raise BadParameter("ses alpha must lie in (0, 1]")
        level = float(values[0])
        for v in values[1:]:
            level = alpha * float(v) + (1.0 - alpha) * level
        return [level] * horizon
    raise BadParameter(f"unknown baseline method: {method!r}")


def parse_method(text: str) -> tuple[str, dict]:
    """Parse method strings like "naive", "moving_average(3)", "ses(0.4)"."""
    text = text.strip()
    if "(" not in text:
        return text, {}
    if not text.endswith(")"):
        raise BadParameter(f"malformed method string: {text!r}")
    name, arg = text[:-1].split("(", 1)
    name = name.strip()
    if name == "moving_average":
        try:
            return name, {"window": int(arg)}
        except ValueError as exc:
            raise BadParameter(f"bad moving_average window: {arg!r}") from exc
    if name == "ses":
        try:
            return name, {"alpha": float(arg)}
        except ValueError as exc:
            raise BadParameter(f"bad ses alpha: {arg!r}") from exc
    raise BadParameter(f"method {name!r} takes no argument")


# ------------------------------------------------------------- backtest


@dataclass(frozen=True)
class BacktestPlan:
    initial_train_weeks: int
    step_weeks: int
    horizon_weeks: int
    n_folds: int

    def __post_init__(self) -> None:
        for name in ("initial_train_weeks", "step_weeks", "horizon_weeks", "n_folds"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise BadParameter(f"{name} must be a positive integer")

    def required_length(self) -> int:
        return (
            self.initial_train_weeks
            + (self.n_folds - 1) * self.step_weeks
            + self.horizon_weeks
        )

    def folds(self) -> list[tuple[int, int]]:
        """Per fold: (train_end, test_end) as exclusive indices."""
        out = []
        for i in range(self.n_folds):
            train_end = self.initial_train_weeks + i * self.step_weeks
            out.append((train_end, train_end + self.horizon_weeks))
        return out


@dataclass(frozen=True)
class FoldResult:
    fold: int
    train_start: object
    train_end: object
    test_start: object
    test_end: object
    mape: float
    rmse: float
    pinball50: float
    pinball90: float


@dataclass(frozen=True)
class BacktestReport:
    model: str
    folds: tuple[FoldResult, ...]
    mean_mape: float
    mean_rmse: float
    mean_pinball50: float
    mean_pinball90: float


def _slice_series(y: WeeklySeries, stop: int) -> WeeklySeries:
    return WeeklySeries(y.name, y.start_week, y.values[:stop], y.transform)


def _slice_flags(flags: list[FlagSeries], start: int, stop: int, grid_start) -> list[FlagSeries]:
    out = []
    for flag in flags:
        out.append(
            FlagSeries(flag.name, grid_start + start * WEEK, flag.values[start:stop])
        )
    return out


def backtest(
    y: WeeklySeries,
    exog: list[FlagSeries] | None,
    model_spec: dict,
    plan: BacktestPlan,
) -> BacktestReport:
    """Rolling-origin evaluation of one model spec.

    model_spec keys: kind = "baseline" | "sarimax" | "auto" | "trailing_yoy";
    baseline adds method (and window/alpha), sarimax adds order, auto adds
    search-space overrides.
    """
    exog = list(exog or [])
    if plan.required_length() > len(y):
        raise PlanTooLarge(
            f"plan needs {plan.required_length()} weeks, series has {len(y)}"
        )
    results = []
    for fold_index, (train_end, test_end) in enumerate(plan.folds()):
        assert train_end < test_end <= len(y)
        train = _slice_series(y, train_end)
        actual = y.values[train_end:test_end]
        horizon = plan.horizon_weeks
        p50, p90 = _forecast_with_spec(train, exog, model_spec, train_end, horizon, y)
        pair50 = EvaluationPair(actual, p50)
        pair90 = EvaluationPair(actual, p90)
        results.append(
            FoldResult(
                fold=fold_index,
                train_start=y.start_week,
                train_end=y.week_at(train_end - 1),
                test_start=y.week_at(train_end),
                test_end=y.week_at(test_end - 1),
                mape=mape(pair50),
                rmse=rmse(pair50),
                pinball50=pinball(pair50, 0.5),
                pinball90=pinball(pair90, 0.9),
            )
        )
    return BacktestReport(
        model=_spec_label(model_spec),
        folds=tuple(results),
        mean_mape=float(np.mean([r.mape for r in results])),
        mean_rmse=float(np.mean([r.rmse for r in results])),
        mean_pinball50=float(np.mean([r.pinball50 for r in results])),
        mean_pinball90=float(np.mean([r.pinball90 for r in results])),
    )


def _spec_label(spec: dict) -> str:
    kind = spec.get("kind", "baseline")
    if kind == "baseline":
        method = spec.get("method", "naive")
        if "window" in spec:
            return f"{method}({spec['window']})"
        if "alpha" in spec:
            return f"{method}({spec['alpha']})"
        return str(method)
    if kind == "sarimax":
        order = tuple(spec.get("order", ()))
        if len(order) == 7:
            return "sarimax({},{},{})({},{},{})[{}]".format(*order)
        return f"sarimax{order}"
    return str(kind)


def _forecast_with_spec(
    train: WeeklySeries,
    exog: list[FlagSeries],
    spec: dict,
    train_end: int,
    horizon: int,
    full: WeeklySeries,
) -> tuple[np.ndarray, np.ndarray]:
    """(P50, P90) forecasts for the test block; point models use the same
    values for both quantiles."""
    kind = spec.get("kind", "baseline")
    if kind == "baseline":
        method, args = spec.get("method", "naive"), {}
        if "window" in spec:
            args["window"] = spec["window"]
        if "alpha" in spec:
            args["alpha"] = spec["alpha"]
        point = np.asarray(baseline_forecast(train, method, horizon, **args))
        return point, point
    if kind == "trailing_yoy":
        point = np.asarray(trailing_yoy_benchmark(train, horizon))
        return point, point
    if kind in ("sarimax", "auto"):
        from .autoorder import SearchSpace, select_order
        from .sarimax import SarimaOrder, fit as sarimax_fit, forecast as sarimax_forecast, quantile
        from .series import log_transform

        if spec.get("log"):
            train = log_transform(train)
        train_flags = _slice_flags(exog, 0, train_end, full.start_week)
        future_flags = _slice_flags(exog, train_end, train_end + horizon, full.start_week)
        if kind == "sarimax":
            order = SarimaOrder(*spec["order"])
            fitted = sarimax_fit(train, train_flags, order)
        else:
            overrides = {k: v for k, v in spec.items() if k not in ("kind", "log")}
            space = SearchSpace(**overrides)
            fitted = select_order(train, train_flags, space).best
        dist = sarimax_forecast(fitted, train, train_flags, future_flags, horizon)
        p50 = np.array([quantile(dist, h, 0.5) for h in range(1, horizon + 1)])
        p90 = np.array([quantile(dist, h, 0.9) for h in range(1, horizon + 1)])
        return p50, p90
    raise BadParameter(f"unknown model kind: {kind!r}")
