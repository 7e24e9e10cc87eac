"""CSV ingestion under the weekly input contract.

Expected shape: a header row starting with `week_start`, ISO-8601 Monday
dates, one float column per metric, and optional integer flag columns
restricted to {-1, 0, 1}. Weeks must be consecutive; gaps are a hard error
unless linear gap-fill is explicitly enabled.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass

import numpy as np

from .errors import BadParameter, GapError, NonMondayDate, ParseError
from .series import WEEK, FlagSeries, WeeklySeries, require_monday
from .varx import MultiSeries

# header names treated as flag columns when the config does not say
KNOWN_FLAG_COLUMNS = ("peak", "covid")


@dataclass(frozen=True)
class IngestConfig:
    metrics: tuple[str, ...] | None = None
    flags: tuple[str, ...] | None = None
    fill_gaps: bool = False


def _parse_date(text: str, where: str) -> dt.date:
    try:
        day = dt.date.fromisoformat(text.strip())
    except ValueError as exc:
        raise ParseError(f"{where}: bad week_start {text!r}") from exc
    try:
        return require_monday(day)
    except NonMondayDate as exc:
        raise NonMondayDate(f"{where}: {exc}") from None


def _parse_float(text: str, column: str, where: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise ParseError(f"{where}: column {column!r} has non-numeric value {text!r}") from exc
    if not np.isfinite(value):
        raise ParseError(f"{where}: column {column!r} has non-finite value {text!r}")
    return value


def _parse_flag(text: str, column: str, where: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise ParseError(f"{where}: column {column!r} has non-integer flag {text!r}") from exc
    if value not in (-1, 0, 1):
        raise ParseError(f"{where}: column {column!r} has flag {value}, allowed: -1, 0, 1")
    return value


def ingest(path: str, config: IngestConfig | None = None) -> tuple[MultiSeries, list[FlagSeries]]:
    """Read, validate and split a weekly CSV into metric and flag series."""
    config = config or IngestConfig()
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            table = [row for row in reader if row]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not table:
        raise ParseError(f"{path}: file is empty")
    header = [cell.strip() for cell in table[0]]
    if not header or header[0] != "week_start":
        raise ParseError(f"{path}: first column must be week_start, got {header[:1]}")
    columns = header[1:]
    if len(set(columns)) != len(columns):
        raise ParseError(f"{path}: duplicate column names in header")

    if config.flags is None:
        flag_cols = tuple(c for c in columns if c in KNOWN_FLAG_COLUMNS)
    else:
        flag_cols = tuple(config.flags)
    if config.metrics is None:
        metric_cols = tuple(c for c in columns if c not in flag_cols)
    else:
        metric_cols = tuple(config.metrics)
    for name in metric_cols + flag_cols:
        if name not in columns:
            raise BadParameter(f"configured column {name!r} is not in the header")
    shared = set(metric_cols) & set(flag_cols)
    if shared:
        raise BadParameter(f"columns cannot be both metric and flag: {sorted(shared)}")
    if not metric_cols:
        raise ParseError(f"{path}: no metric columns")

    position = {name: i + 1 for i, name in enumerate(columns)}
    parsed: list[tuple[dt.date, dict[str, float], dict[str, int]]] = []
    for lineno, row in enumerate(table[1:], start=2):
        where = f"{path}:{lineno}"
        if len(row) != len(header):
            raise ParseError(f"{where}: expected {len(header)} cells, got {len(row)}")
        monday = _parse_date(row[0], where)
        metrics = {c: _parse_float(row[position[c]], c, where) for c in metric_cols}
        flags = {c: _parse_flag(row[position[c]], c, where) for c in flag_cols}
        parsed.append((monday, metrics, flags))
    if not parsed:
        raise ParseError(f"{path}: no data rows")

    start = parsed[0][0]
    grid: list[tuple[dict[str, float], dict[str, int]]] = []
    expected = start
    i = 0
    while i < len(parsed):
        monday, metrics, flags = parsed[i]
        if monday == expected:
            grid.append((metrics, flags))
            expected = expected + WEEK
            i += 1
            continue
        if monday < expected:
            raise ParseError(
                f"{path}: week {monday.isoformat()} is out of order or duplicated"
            )
        if not config.fill_gaps:
            raise GapError(f"{path}: missing week {expected.isoformat()}")
        # linear interpolation between the previous and next present weeks
        prev_metrics = grid[-1][0] if grid else metrics
        span = (monday - expected).days // 7 + 1
        step = {
            c: (metrics[c] - prev_metrics[c]) / span for c in metric_cols
        }
        filled = {c: prev_metrics[c] + step[c] for c in metric_cols}
        grid.append((filled, {c: 0 for c in flag_cols}))
        expected = expected + WEEK

    n = len(grid)
    components = tuple(
        WeeklySeries(
            name=c,
            start_week=start,
            values=np.array([row[0][c] for row in grid]),
        )
        for c in metric_cols
    )
    flag_series = [
        FlagSeries(
            name=c,
            start_week=start,
            values=np.array([row[1][c] for row in grid], dtype=np.int64),
        )
        for c in flag_cols
    ]
    assert all(len(s) == n for s in components)
    return MultiSeries(components=components), flag_series
