"""False-peak detection on forecast streams.

A single left-to-right pass: at each index the trailing window of already
adjusted values supplies a moving average and sample standard deviation;
a value deviating from the average by more than k standard deviations is
flagged as a false peak and replaced by the mean of itself and the
previous adjusted value, so a sustained spike is damped progressively
instead of becoming the new normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadParameter, IndexOutOfRange, SeriesTooShort
from .series import WeeklySeries


@dataclass(frozen=True)
class PeakConfig:
    window_n: int = 8
    k: float = 3.0
    # "window" takes the SD of the trailing values themselves; "avg_series"
    # takes the SD of the trailing moving averages (an alternative reading
    # of the threshold rule, kept selectable)
    sd_mode: str = "window"

    def __post_init__(self) -> None:
        if not isinstance(self.window_n, (int, np.integer)) or self.window_n < 2:
            raise BadParameter("window_n must be an integer >= 2")
        if not (self.k > 0.0) or not math.isfinite(self.k):
            raise BadParameter("k must be a positive real")
        if self.sd_mode not in ("window", "avg_series"):
            raise BadParameter(f"unknown sd_mode: {self.sd_mode!r}")


@dataclass(frozen=True)
class PeakScanResult:
    flags: np.ndarray  # bool per index
    adjusted: WeeklySeries
    stats: tuple  # per index: (moving_avg, sd) or None before the first window

    def __post_init__(self) -> None:
        arr = np.asarray(self.flags, dtype=bool)
        arr.setflags(write=False)
        object.__setattr__(self, "flags", arr)

    def flagged_indices(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.flags)]


def moving_stats(values, window_n: int, at: int) -> tuple[float, float]:
    """Mean and sample SD (n-1 divisor) of values[at-window_n .. at-1]."""
    vals = np.asarray(values, dtype=float)
    if not isinstance(window_n, (int, np.integer)) or window_n < 2:
        raise BadParameter("window_n must be an integer >= 2")
    if not window_n <= at <= vals.size:
        raise IndexOutOfRange(
            f"index {at} needs a full window of {window_n} prior values"
        )
    window = vals[at - window_n : at]
    avg = float(np.mean(window))
    sd = float(np.std(window, ddof=1))
    return avg, sd


def scan_peaks(f: WeeklySeries, cfg: PeakConfig | None = None) -> PeakScanResult:
    """One pass over a forecast series, damping values beyond k SDs."""
    cfg = cfg or PeakConfig()
    values = f.values
    n = values.size
    if n <= cfg.window_n:
        raise SeriesTooShort(
            f"need more than window_n={cfg.window_n} values, have {n}"
        )
    adjusted = values.copy()
    flags = np.zeros(n, dtype=bool)
    stats: list = [None] * n
    first = cfg.window_n if cfg.sd_mode == "window" else 2 * cfg.window_n - 1
    for i in range(cfg.window_n, n):
        avg, sd = moving_stats(adjusted, cfg.window_n, i)
        if cfg.sd_mode == "avg_series":
            if i < first:
                stats[i] = (avg, float("nan"))
                continue
            trailing_avgs = [
                moving_stats(adjusted, cfg.window_n, j)[0]
                for j in range(i - cfg.window_n + 1, i + 1)
            ]
            sd = float(np.std(trailing_avgs, ddof=1))
        stats[i] = (avg, sd)
        if abs(values[i] - avg) > cfg.k * sd:
            flags[i] = True
            adjusted[i] = 0.5 * (adjusted[i - 1] + values[i])
    return PeakScanResult(
        flags=flags,
        adjusted=f.with_values(adjusted),
        stats=tuple(stats),
    )
