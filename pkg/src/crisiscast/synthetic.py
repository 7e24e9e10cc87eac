"""Seeded synthetic weekly retail data: trend, annual seasonality, Black
Friday / Cyber Monday spikes, an optional crisis shock, and lognormal noise.

The generated metrics (tpv, new_usd, reengaged_usd, merchants) provide a
desk-scale stand-in for proprietary payment data.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadParameter
from .series import WEEK, ScenarioConfig, WeeklySeries, black_friday, cyber_monday
from .varx import MultiSeries

METRIC_NAMES = ("tpv", "new_usd", "reengaged_usd", "merchants")


@dataclass(frozen=True)
class SyntheticParams:
    start_year: int = 2015
    base_level: float = 1_000_000.0
    annual_growth: float = 0.08
    seasonal_amplitude: float = 0.12
    # the seasonal profile peaks at this ISO week (late November)
    seasonal_peak_week: int = 48
    bf_multiplier: float = 2.0
    cm_multiplier: float = 1.6
    noise_sigma: float = 0.03
    covid_enabled: bool = True
    covid_level_shift: float = 0.35
    covid_spike: float = 0.6
    covid_decay: float = 0.25
    covid_weeks: tuple[str, ...] = field(
        default_factory=lambda: tuple(f"2020-W{w:02d}" for w in range(12, 27))
    )
    new_share: float = 0.25
    reengaged_share: float = 0.15
    covid_new_share_bonus: float = 0.10
    avg_ticket: float = 55.0

    def __post_init__(self) -> None:
        if self.base_level <= 0.0 or self.avg_ticket <= 0.0:
            raise BadParameter("base_level and avg_ticket must be positive")
        if not -0.5 < self.annual_growth < 2.0:
            raise BadParameter("annual_growth must lie in (-0.5, 2.0)")
        if not 0.0 <= self.seasonal_amplitude < 1.0:
            raise BadParameter("seasonal_amplitude must lie in [0, 1)")
        if not 1 <= self.seasonal_peak_week <= 52:
            raise BadParameter("seasonal_peak_week must be an ISO week number")
        if self.bf_multiplier < 1.0 or self.cm_multiplier < 1.0:
            raise BadParameter("holiday multipliers must be >= 1")
        if self.noise_sigma < 0.0:
            raise BadParameter("noise_sigma must be >= 0")
        if self.covid_spike < 0.0 or self.covid_decay < 0.0:
            raise BadParameter("covid_spike and covid_decay must be >= 0")
        if self.covid_level_shift <= -1.0:
            raise BadParameter("covid_level_shift must exceed -1")
        if not 0.0 < self.new_share < 1.0 or not 0.0 < self.reengaged_share < 1.0:
            raise BadParameter("shares must lie in (0, 1)")
        if self.new_share + self.reengaged_share + self.covid_new_share_bonus >= 1.0:
            raise BadParameter("share parameters must leave room for repeat volume")


def _iso_year_start(year: int) -> dt.date:
    return dt.date.fromisocalendar(year, 1, 1)


def generate_synthetic(
    years: int, seed: int, params: SyntheticParams | None = None
) -> MultiSeries:
    """Weekly metrics covering `years` complete ISO years.

    tpv[t] = level * trend * seasonal * holiday * crisis * lognormal noise;
    the other metrics derive from tpv with their own noise. Deterministic
    given (years, seed, params).
    """
    if not isinstance(years, (int, np.integer)) or years < 2:
        raise BadParameter("years must be an integer >= 2")
    p = params or SyntheticParams()
    start = _iso_year_start(p.start_year)
    end = _iso_year_start(p.start_year + years)
    n_weeks = (end - start).days // 7

    holiday_mondays: dict[dt.date, float] = {}
    for year in range(p.start_year - 1, p.start_year + years + 1):
        for day, mult in ((black_friday(year), p.bf_multiplier), (cyber_monday(year), p.cm_multiplier)):
            monday = day - dt.timedelta(days=day.weekday())
            holiday_mondays[monday] = max(holiday_mondays.get(monday, 1.0), mult)

    covid_mondays = {}
    if p.covid_enabled:
        for offset, label in enumerate(p.covid_weeks):
            y, w = label.split("-W")
            covid_mondays[dt.date.fromisocalendar(int(y), int(w), 1)] = offset

    rng = np.random.default_rng(seed)
    noise = {name: rng.normal(0.0, p.noise_sigma, size=n_weeks) for name in METRIC_NAMES}
    share_noise = rng.normal(0.0, 0.01, size=n_weeks)

    weekly_growth = (1.0 + p.annual_growth) ** (1.0 / 52.0)
    tpv = np.empty(n_weeks)
    new_usd = np.empty(n_weeks)
    reengaged_usd = np.empty(n_weeks)
    merchants = np.empty(n_weeks)
    for t in range(n_weeks):
        monday = start + t * WEEK
        iso_week = monday.isocalendar()[1]
        trend = p.base_level * weekly_growth**t
        seasonal = 1.0 + p.seasonal_amplitude * np.cos(
            2.0 * np.pi * (iso_week - p.seasonal_peak_week) / 52.0
        )
        holiday = holiday_mondays.get(monday, 1.0)
        crisis = 1.0
        if monday in covid_mondays:
            offset = covid_mondays[monday]
            crisis = 1.0 + p.covid_level_shift + p.covid_spike * np.exp(-p.covid_decay * offset)
        tpv[t] = trend * seasonal * holiday * crisis * np.exp(noise["tpv"][t])

        share = p.new_share + share_noise[t]
        if monday in covid_mondays:
            share += p.covid_new_share_bonus
        new_usd[t] = tpv[t] * share * np.exp(noise["new_usd"][t])
        reengaged_usd[t] = tpv[t] * p.reengaged_share * np.exp(noise["reengaged_usd"][t])
        merchants[t] = max(1.0, tpv[t] / p.avg_ticket * np.exp(noise["merchants"][t]))

    values = {
        "tpv": tpv,
        "new_usd": new_usd,
        "reengaged_usd": reengaged_usd,
        "merchants": merchants,
    }
    components = tuple(
        WeeklySeries(name=name, start_week=start, values=values[name]) for name in METRIC_NAMES
    )
    return MultiSeries(components=components)


def default_scenario(params: SyntheticParams | None = None) -> ScenarioConfig:
    """Scenario whose +1 weeks are the generator's crisis weeks and whose
    -1 weeks are the same ISO week numbers one year later."""
    p = params or SyntheticParams()
    negatives = []
    for label in p.covid_weeks:
        y, w = label.split("-W")
        negatives.append(f"{int(y) + 1}-W{w}")
    return ScenarioConfig(
        covid_positive_weeks=tuple(p.covid_weeks),
        covid_negative_weeks=tuple(negatives),
    )


def without_covid(params: SyntheticParams | None = None) -> SyntheticParams:
    return replace(params or SyntheticParams(), covid_enabled=False)
