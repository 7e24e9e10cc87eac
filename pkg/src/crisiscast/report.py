"""Summary table assembly and CSV rendering for every pipeline artifact.

All renderers return CSV text. Floats are written with repr so output is
byte-for-byte reproducible and round-trips without precision loss.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import BadParameter, IncompleteYear
from .evaluation import BacktestReport
from .keywords import KeywordRow
from .msar import RegimeFit, RegimeSpan
from .peaks import PeakScanResult
from .series import WEEK, FlagSeries, WeeklySeries


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return ""
        return repr(value)
    if isinstance(value, dt.date):
        return value.isoformat()
    raise BadParameter(f"cannot render {type(value).__name__} into a CSV cell")


def render_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(cell) for cell in row])
    return buf.getvalue()


# --------------------------------------------------------------- summary


@dataclass(frozen=True)
class SummaryTable:
    """Annual rollup: level sums per metric, a trailing-52-week row for the
    target metric, year-over-year percent changes, and annual means of the
    share metrics."""

    years: tuple[int, ...]
    levels: tuple[tuple[str, tuple[float, ...]], ...]
    yoy: tuple[tuple[str, tuple], ...]
    averages: tuple[tuple[str, tuple[float, ...]], ...]


def _complete_iso_years(start: dt.date, n_weeks: int) -> list[int]:
    end_exclusive = start + n_weeks * WEEK
    years = []
    year = start.isocalendar()[0]
    while True:
        first = dt.date.fromisocalendar(year, 1, 1)
        try:
            next_first = dt.date.fromisocalendar(year + 1, 1, 1)
        except ValueError:
            break
        if first >= start and next_first <= end_exclusive:
            years.append(year)
        if first >= end_exclusive:
            break
        year += 1
    return years


def emit_summary(
    histories: dict[str, WeeklySeries],
    forecasts: dict[str, list[float]] | None = None,
    target: str = "tpv",
    share_metrics: tuple[str, ...] = ("new_usd", "reengaged_usd"),
) -> SummaryTable:
    """Annual summary over every ISO year fully covered by history plus the
    appended point forecasts. All metrics must share a weekly grid."""
    if not histories:
        raise BadParameter("no metric series to summarize")
    forecasts = forecasts or {}
    names = list(histories)
    first = histories[names[0]]
    combined: dict[str, np.ndarray] = {}
    for name in names:
        series = histories[name]
        if series.start_week != first.start_week or len(series) != len(first):
            raise BadParameter(f"series {name!r} is not on the shared weekly grid")
        extra = np.asarray(forecasts.get(name, ()), dtype=float)
        combined[name] = np.concatenate([series.values, extra])
    n_weeks = min(arr.size for arr in combined.values())
    years = _complete_iso_years(first.start_week, n_weeks)
    if not years:
        raise IncompleteYear("the data does not cover a single complete ISO year")

    def week_index(day: dt.date) -> int:
        return (day - first.start_week).days // 7

    bounds = {}
    for year in years:
        lo = week_index(dt.date.fromisocalendar(year, 1, 1))
        hi = week_index(dt.date.fromisocalendar(year + 1, 1, 1))
        bounds[year] = (lo, hi)

    levels: list[tuple[str, tuple[float, ...]]] = []
    for name in names:
        sums = tuple(float(np.sum(combined[name][lo:hi])) for lo, hi in bounds.values())
        levels.append((name, sums))
    if target in combined:
        arr = combined[target]
        ttm = []
        for year in years:
            end = bounds[year][1]  # exclusive index of the year's last week + 1
            if end < 52:
                raise IncompleteYear(f"year {year} ends before 52 weeks of data exist")
            ttm.append(float(np.sum(arr[end - 52 : end])))
        levels.append((f"ttm_{target}", tuple(ttm)))

    yoy = []
    for label, row in levels:
        cells: list = [None]
        for prev, cur in zip(row, row[1:]):
            if prev == 0.0:
                cells.append(None)
            else:
                cells.append((cur / prev - 1.0) * 100.0)
        yoy.append((label, tuple(cells)))

    averages = []
    if target in combined:
        base = combined[target]
        for name in share_metrics:
            if name not in combined or name == target:
                continue
            shares = combined[name][: base.size] / base
            row = tuple(
                float(np.mean(shares[lo:hi]) * 100.0) for lo, hi in bounds.values()
            )
            averages.append((f"{name}_share_pct", row))

    return SummaryTable(
        years=tuple(years),
        levels=tuple(levels),
        yoy=tuple(yoy),
        averages=tuple(averages),
    )


def render_summary_csv(table: SummaryTable) -> str:
    header = ["section", "row"] + [str(y) for y in table.years]
    rows: list[list] = []
    for label, cells in table.levels:
        rows.append(["levels", label, *cells])
    for label, cells in table.yoy:
        rows.append(["yoy_pct", label, *cells])
    for label, cells in table.averages:
        rows.append(["average", label, *cells])
    return render_csv(header, rows)


# ------------------------------------------------------- per-stage CSVs


def render_forecast_csv(
    start_week: dt.date, p50: list[float], p90: list[float], flagged: np.ndarray
) -> str:
    rows = []
    for h in range(len(p50)):
        rows.append([start_week + h * WEEK, p50[h], p90[h], bool(flagged[h])])
    return render_csv(["week_start", "p50", "p90", "flagged"], rows)


def render_peaks_csv(forecast: WeeklySeries, scan: PeakScanResult) -> str:
    rows = []
    for i, monday in enumerate(forecast.weeks()):
        stat = scan.stats[i]
        avg = stat[0] if stat else None
        sd = stat[1] if stat else None
        rows.append(
            [
                monday,
                float(forecast.values[i]),
                avg,
                sd,
                bool(scan.flags[i]),
                float(scan.adjusted.values[i]),
            ]
        )
    return render_csv(
        ["week_start", "forecast", "moving_avg", "moving_sd", "flagged", "adjusted"], rows
    )


def render_regimes_csv(fit: RegimeFit, growth: WeeklySeries) -> str:
    probs = fit.covid_probability()
    offset = len(growth) - fit.n_obs
    rows = []
    for i, monday in enumerate(fit.weeks()):
        p = float(probs[i])
        rows.append(
            [
                monday,
                float(growth.values[offset + i]),
                p,
                "COVID" if p > 0.5 else "Normal",
            ]
        )
    return render_csv(["week_start", "growth", "covid_probability", "regime"], rows)


def render_regime_spans_csv(spans: list[RegimeSpan]) -> str:
    rows = [[s.start_week, s.end_week, s.label] for s in spans]
    return render_csv(["start_week", "end_week", "label"], rows)


def render_backtest_csv(reports: list[BacktestReport]) -> str:
    rows = []
    for report in reports:
        for fold in report.folds:
            rows.append(
                [
                    report.model,
                    fold.fold,
                    fold.train_start,
                    fold.train_end,
                    fold.test_start,
                    fold.test_end,
                    fold.mape,
                    fold.rmse,
                    fold.pinball50,
                    fold.pinball90,
                ]
            )
    return render_csv(
        [
            "model",
            "fold",
            "train_start",
            "train_end",
            "test_start",
            "test_end",
            "mape",
            "rmse",
            "pinball50",
            "pinball90",
        ],
        rows,
    )


def render_leaderboard_csv(reports: list[BacktestReport]) -> str:
    ordered = sorted(reports, key=lambda r: (r.mean_mape, r.model))
    rows = []
    for rank, report in enumerate(ordered, start=1):
        rows.append(
            [
                rank,
                report.model,
                report.mean_mape,
                report.mean_rmse,
                report.mean_pinball50,
                report.mean_pinball90,
            ]
        )
    return render_csv(
        ["rank", "model", "mean_mape", "mean_rmse", "mean_pinball50", "mean_pinball90"],
        rows,
    )


def render_order_leaderboard_csv(rows_in) -> str:
    rows = []
    for row in rows_in:
        rows.append(
            [
                "({},{},{})({},{},{})[{}]".format(*row.order.as_tuple()),
                row.aicc if math.isfinite(row.aicc) else None,
                row.loglik if math.isfinite(row.loglik) else None,
                bool(row.converged),
            ]
        )
    return render_csv(["order", "aicc", "loglik", "converged"], rows)


def render_plot_csv(
    actual: WeeklySeries,
    fitted: np.ndarray,
    forecast_start: dt.date,
    p50: list[float],
    p90: list[float],
    regime_weeks: dict[dt.date, float],
    peak_flags: dict[dt.date, int],
    covid_flags: dict[dt.date, int],
) -> str:
    rows = []
    for i, monday in enumerate(actual.weeks()):
        rows.append(
            [
                monday,
                float(actual.values[i]),
                float(fitted[i]) if not math.isnan(fitted[i]) else None,
                None,
                None,
                regime_weeks.get(monday),
                peak_flags.get(monday, 0),
                covid_flags.get(monday, 0),
            ]
        )
    for h in range(len(p50)):
        monday = forecast_start + h * WEEK
        rows.append(
            [
                monday,
                None,
                None,
                p50[h],
                p90[h],
                regime_weeks.get(monday),
                peak_flags.get(monday, 0),
                covid_flags.get(monday, 0),
            ]
        )
    return render_csv(
        [
            "week_start",
            "actual",
            "fitted",
            "p50",
            "p90",
            "covid_probability",
            "peak_flag",
            "covid_flag",
        ],
        rows,
    )


def render_keywords_csv(rows_in: list[KeywordRow]) -> str:
    rows = []
    for row in rows_in:
        rows.append(
            [
                row.term,
                row.frequency,
                row.saliency,
                row.best_topic,
                row.relevance,
                row.essentiality,
                row.trend_ratio,
            ]
        )
    return render_csv(
        ["term", "frequency", "saliency", "best_topic", "relevance", "essentiality", "trend_ratio"],
        rows,
    )


def render_input_csv(metrics: list[WeeklySeries], flags: list[FlagSeries]) -> str:
    """Input-contract CSV: week_start, one column per metric, then flags."""
    if not metrics:
        raise BadParameter("need at least one metric series")
    first = metrics[0]
    for other in metrics[1:]:
        if other.start_week != first.start_week or len(other) != len(first):
            raise BadParameter(f"series {other.name!r} is not on the shared weekly grid")
    for flag in flags:
        if flag.start_week != first.start_week or len(flag) != len(first):
            raise BadParameter(f"flag {flag.name!r} is not on the shared weekly grid")
    header = ["week_start"] + [m.name for m in metrics] + [f.name for f in flags]
    rows = []
    for i, monday in enumerate(first.weeks()):
        row: list = [monday]
        row.extend(float(m.values[i]) for m in metrics)
        row.extend(int(f.values[i]) for f in flags)
        rows.append(row)
    return render_csv(header, rows)
