"""Weekly series containers, calendar rules, transforms and flag builders.

Every series in this package is a run of consecutive ISO weeks, each week
identified by its Monday. Values are stored as a read-only float64 array so
a series can be shared between fits without defensive copying.
"""

from __future__ import annotations

import datetime as dt
import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    BadParameter,
    GapError,
    IndexOutOfRange,
    NonMondayDate,
    NonPositiveValue,
    OverlappingWeekSets,
    ParseError,
    SeriesTooShort,
)

WEEK = dt.timedelta(days=7)

_ISO_WEEK_RE = re.compile(r"^(\d{4})-W(\d{2})$")


# ------------------------------------------------------------- calendar


def require_monday(day: dt.date) -> dt.date:
    if day.isoweekday() != 1:
        raise NonMondayDate(f"{day.isoformat()} is not a Monday")
    return day


def iso_week_label(day: dt.date) -> str:
    """ISO label of the week containing `day`, e.g. 2020-W12."""
    y, w, _ = day.isocalendar()
    return f"{y}-W{w:02d}"


def parse_iso_week(label: str) -> dt.date:
    """Monday of the ISO week written as YYYY-Www."""
    m = _ISO_WEEK_RE.match(label)
    if not m:
        raise ParseError(f"bad ISO week label: {label!r}")
    year, week = int(m.group(1)), int(m.group(2))
    try:
        return dt.date.fromisocalendar(year, week, 1)
    except ValueError as exc:
        raise ParseError(f"bad ISO week label: {label!r}") from exc


def black_friday(year: int) -> dt.date:
    """Day after the fourth Thursday of November (US rule)."""
    nov1 = dt.date(year, 11, 1)
    first_thursday = nov1 + dt.timedelta(days=(3 - nov1.weekday()) % 7)
    return first_thursday + dt.timedelta(days=21 + 1)


def cyber_monday(year: int) -> dt.date:
    return black_friday(year) + dt.timedelta(days=3)


# ----------------------------------------------------------- containers


@dataclass(frozen=True)
class WeeklySeries:
    """A named run of consecutive weekly observations.

    `start_week` is the Monday of the first observation. `transform`
    records what scale the values are on ("level" or "log") so that
    downstream forecasting knows whether to exponentiate.
    """

    name: str
    start_week: dt.date
    values: np.ndarray
    transform: str = "level"

    def __post_init__(self) -> None:
        require_monday(self.start_week)
        if self.transform not in ("level", "log"):
            raise BadParameter(f"unknown transform tag: {self.transform!r}")
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1:
            raise BadParameter("values must be one-dimensional")
        if arr.size == 0:
            raise SeriesTooShort("a series needs at least one observation")
        if not np.all(np.isfinite(arr)):
            raise ParseError(f"series {self.name!r} has non-finite values")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)

    def week_at(self, i: int) -> dt.date:
        if not 0 <= i < len(self):
            raise IndexOutOfRange(f"week index {i} outside 0..{len(self) - 1}")
        return self.start_week + i * WEEK

    @property
    def end_week(self) -> dt.date:
        return self.week_at(len(self) - 1)

    def weeks(self) -> list[dt.date]:
        return [self.start_week + i * WEEK for i in range(len(self))]

    def index_of(self, day: dt.date) -> int:
        require_monday(day)
        offset = (day - self.start_week).days
        if offset % 7 != 0 or not 0 <= offset // 7 < len(self):
            raise IndexOutOfRange(f"{day.isoformat()} outside series span")
        return offset // 7

    def with_values(self, values: np.ndarray, transform: str | None = None) -> "WeeklySeries":
        return replace(
            self, values=values, transform=self.transform if transform is None else transform
        )


@dataclass(frozen=True)
class FlagSeries:
    """Integer intervention flags aligned to a weekly grid, values in {-1, 0, 1}."""

    name: str
    start_week: dt.date
    values: np.ndarray

    def __post_init__(self) -> None:
        require_monday(self.start_week)
        arr = np.asarray(self.values)
        if arr.ndim != 1 or arr.size == 0:
            raise BadParameter("flags must be a non-empty one-dimensional array")
        as_int = np.asarray(arr, dtype=np.int64)
        if not np.array_equal(np.asarray(arr, dtype=np.float64), as_int):
            raise ParseError(f"flag series {self.name!r} has non-integer values")
        if not np.all(np.isin(as_int, (-1, 0, 1))):
            raise ParseError(f"flag series {self.name!r} has values outside {{-1, 0, 1}}")
        as_int = as_int.copy()
        as_int.setflags(write=False)
        object.__setattr__(self, "values", as_int)

    def __len__(self) -> int:
        return int(self.values.size)

    def weeks(self) -> list[dt.date]:
        return [self.start_week + i * WEEK for i in range(len(self))]

    def as_float(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


def _default_positive_weeks() -> tuple[str, ...]:
    return tuple(f"2020-W{w:02d}" for w in range(12, 27))


def _default_negative_weeks() -> tuple[str, ...]:
    return tuple(f"2021-W{w:02d}" for w in range(12, 27))


@dataclass(frozen=True)
class ScenarioConfig:
    """Crisis scenario: which weeks get +1 shock flags and which get the
    -1 base-effect flags one year later, plus the forecast horizon."""

    covid_positive_weeks: tuple[str, ...] = field(default_factory=_default_positive_weeks)
    covid_negative_weeks: tuple[str, ...] = field(default_factory=_default_negative_weeks)
    horizon_weeks: int = 78

    def __post_init__(self) -> None:
        pos = tuple(self.covid_positive_weeks)
        neg = tuple(self.covid_negative_weeks)
        for label in pos + neg:
            parse_iso_week(label)
        if len(set(pos)) != len(pos) or len(set(neg)) != len(neg):
            raise BadParameter("scenario week lists must not repeat weeks")
        shared = set(pos) & set(neg)
        if shared:
            raise OverlappingWeekSets(f"weeks in both shock sets: {sorted(shared)}")
        if not isinstance(self.horizon_weeks, int) or self.horizon_weeks < 1:
            raise BadParameter("horizon_weeks must be a positive integer")
        object.__setattr__(self, "covid_positive_weeks", pos)
        object.__setattr__(self, "covid_negative_weeks", neg)

    def positive_mondays(self) -> set[dt.date]:
        return {parse_iso_week(w) for w in self.covid_positive_weeks}

    def negative_mondays(self) -> set[dt.date]:
        return {parse_iso_week(w) for w in self.covid_negative_weeks}


# ----------------------------------------------------------- transforms


def log_transform(series: WeeklySeries) -> WeeklySeries:
    """Natural log of a strictly positive level series."""
    if series.transform == "log":
        raise BadParameter(f"series {series.name!r} is already on the log scale")
    if np.any(series.values <= 0.0):
        bad = int(np.argmax(series.values <= 0.0))
        raise NonPositiveValue(
            f"series {series.name!r} has value {series.values[bad]} at "
            f"{series.week_at(bad).isoformat()}; log needs positive values"
        )
    return series.with_values(np.log(series.values), transform="log")


def exp_transform(series: WeeklySeries) -> WeeklySeries:
    if series.transform != "log":
        raise BadParameter(f"series {series.name!r} is not on the log scale")
    return series.with_values(np.exp(series.values), transform="level")


def difference(values: np.ndarray, lag: int) -> np.ndarray:
    """x[t] - x[t-lag]; length shrinks by `lag`."""
    if lag < 1:
        raise BadParameter("difference lag must be >= 1")
    arr = np.asarray(values, dtype=np.float64)
    if arr.size <= lag:
        raise SeriesTooShort(f"need more than {lag} observations to difference at lag {lag}")
    return arr[lag:] - arr[:-lag]


def seasonal_difference(series: WeeklySeries, lag: int = 52) -> WeeklySeries:
    """Year-over-year difference: value minus the value `lag` weeks before.

    The result starts `lag` weeks later than the input and is `lag`
    observations shorter.
    """
    diffed = difference(series.values, lag)
    return WeeklySeries(
        name=f"{series.name}_sdiff{lag}",
        start_week=series.start_week + lag * WEEK,
        values=diffed,
        transform=series.transform,
    )


def undifference(diffed: np.ndarray, initial: np.ndarray, lag: int) -> np.ndarray:
    """Invert `difference`: rebuild levels from `lag` seed values plus diffs."""
    init = np.asarray(initial, dtype=np.float64)
    d = np.asarray(diffed, dtype=np.float64)
    if init.size != lag:
        raise BadParameter(f"need exactly {lag} seed values, got {init.size}")
    out = np.concatenate([init, np.empty_like(d)])
    for t in range(d.size):
        out[lag + t] = out[t] + d[t]
    return out


# -------------------------------------------------------- flag builders


def _grid_mondays(start_week: dt.date, n_weeks: int) -> list[dt.date]:
    require_monday(start_week)
    if n_weeks < 1:
        raise BadParameter("n_weeks must be a positive integer")
    return [start_week + i * WEEK for i in range(n_weeks)]


def build_peak_flag(start_week: dt.date, n_weeks: int) -> FlagSeries:
    """1 in any week containing Black Friday or Cyber Monday, else 0.

    Cyber Monday always lands three days after Black Friday, so it starts
    the following ISO week; both weeks get flagged.
    """
    mondays = _grid_mondays(start_week, n_weeks)
    peak_mondays: set[dt.date] = set()
    for year in range(start_week.year - 1, mondays[-1].year + 2):
        for day in (black_friday(year), cyber_monday(year)):
            peak_mondays.add(day - dt.timedelta(days=day.weekday()))
    flags = np.array([1 if m in peak_mondays else 0 for m in mondays], dtype=np.int64)
    return FlagSeries(name="peak", start_week=start_week, values=flags)


def build_covid_flag(
    start_week: dt.date, n_weeks: int, scenario: ScenarioConfig | None = None
) -> FlagSeries:
    """+1 in the crisis shock weeks, -1 in the matching base-effect weeks
    a year later, 0 elsewhere."""
    scenario = scenario or ScenarioConfig()
    mondays = _grid_mondays(start_week, n_weeks)
    pos = scenario.positive_mondays()
    neg = scenario.negative_mondays()
    flags = np.array(
        [1 if m in pos else -1 if m in neg else 0 for m in mondays], dtype=np.int64
    )
    return FlagSeries(name="covid", start_week=start_week, values=flags)


def align_flags(series: WeeklySeries, flags: FlagSeries) -> np.ndarray:
    """Flag values on the exact weekly grid of `series` (0 outside the flag span)."""
    out = np.zeros(len(series), dtype=np.float64)
    for i, m in enumerate(flags.weeks()):
        offset = (m - series.start_week).days
        if offset % 7 == 0 and 0 <= offset // 7 < len(series):
            out[offset // 7] = float(flags.values[i])
    return out


def check_alignment(series: WeeklySeries, other: WeeklySeries) -> None:
    """Both series must sit on the same weekly grid over the same span."""
    if series.start_week != other.start_week or len(series) != len(other):
        raise GapError(
            f"series {series.name!r} and {other.name!r} do not share a weekly grid"
        )


def ttm_sum(values: np.ndarray, window: int = 52) -> np.ndarray:
    """Trailing sums over `window` observations; defined from index window-1 on."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < window:
        raise SeriesTooShort(f"need at least {window} observations for a trailing sum")
    csum = np.concatenate([[0.0], np.cumsum(arr)])
    return csum[window:] - csum[:-window]


def nearly_equal(a: float, b: float, tol: float = 1e-9) -> bool:
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)
