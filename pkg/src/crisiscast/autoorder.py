"""Automatic SARIMA order selection by AICc over a bounded grid.

Two modes: exhaustive enumeration of the full grid, and a stepwise search
that walks +-1 neighborhoods from four standard starting orders, stopping
after 50 evaluations without improvement. Both are deterministic; ties
break on the lexicographic order tuple so concurrent evaluation schedules
cannot change the selection.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import (
    BadParameter,
    DataError,
    DegenerateSampleSize,
    NoConvergedCandidate,
    NumericalError,
)
from .sarimax.params import MAX_PQ, MAX_SEASONAL, SarimaOrder
from .series import FlagSeries, WeeklySeries

STEPWISE_PATIENCE = 50


def aicc(loglik: float, k: int, n: int) -> float:
    """Small-sample-corrected Akaike criterion: -2*loglik + 2k*n/(n-k-1)."""
    if n <= k + 1:
        raise DegenerateSampleSize(f"aicc needs n > k + 1, got n={n}, k={k}")
    return -2.0 * loglik + 2.0 * k * n / (n - k - 1.0)


def _default_diff_set() -> tuple[int, ...]:
    return (0, 1)


@dataclass(frozen=True)
class SearchSpace:
    max_p: int = 3
    max_q: int = 3
    max_P: int = 2
    max_Q: int = 2
    d_set: tuple[int, ...] = field(default_factory=_default_diff_set)
    D_set: tuple[int, ...] = field(default_factory=_default_diff_set)
    s: int = 52
    mode: str = "exhaustive"

    def __post_init__(self) -> None:
        if self.mode not in ("exhaustive", "stepwise"):
            raise BadParameter(f"unknown search mode: {self.mode!r}")
        if not (0 <= self.max_p <= MAX_PQ and 0 <= self.max_q <= MAX_PQ):
            raise BadParameter(f"max_p/max_q must be within 0..{MAX_PQ}")
        if not (0 <= self.max_P <= MAX_SEASONAL and 0 <= self.max_Q <= MAX_SEASONAL):
            raise BadParameter(f"max_P/max_Q must be within 0..{MAX_SEASONAL}")
        d_set = tuple(sorted(set(int(d) for d in self.d_set)))
        dd_set = tuple(sorted(set(int(d) for d in self.D_set)))
        if not d_set or not dd_set:
            raise BadParameter("d_set and D_set must be non-empty")
        if not set(d_set) <= {0, 1} or not set(dd_set) <= {0, 1}:
            raise BadParameter("d_set and D_set are subsets of {0, 1}")
        object.__setattr__(self, "d_set", d_set)
        object.__setattr__(self, "D_set", dd_set)
        if self.s < 1:
            raise BadParameter("seasonal period must be positive")

    def candidates(self) -> list[SarimaOrder]:
        return [
            SarimaOrder(p, d, q, pp, dd, qq, self.s)
            for p, d, q, pp, dd, qq in itertools.product(
                range(self.max_p + 1),
                self.d_set,
                range(self.max_q + 1),
                range(self.max_P + 1),
                self.D_set,
                range(self.max_Q + 1),
            )
        ]

    def grid_size(self) -> int:
        return (
            (self.max_p + 1)
            * (self.max_q + 1)
            * (self.max_P + 1)
            * (self.max_Q + 1)
            * len(self.d_set)
            * len(self.D_set)
        )

    def contains(self, order: SarimaOrder) -> bool:
        return (
            0 <= order.p <= self.max_p
            and 0 <= order.q <= self.max_q
            and 0 <= order.P <= self.max_P
            and 0 <= order.Q <= self.max_Q
            and order.d in self.d_set
            and order.D in self.D_set
            and order.s == self.s
        )


@dataclass(frozen=True)
class LeaderboardRow:
    order: SarimaOrder
    aicc: float
    loglik: float
    converged: bool


@dataclass(frozen=True)
class SearchResult:
    best: "FittedSarimax"
    leaderboard: tuple[LeaderboardRow, ...]
    n_evaluated: int


def _sort_key(row: LeaderboardRow):
    return (row.aicc, row.order.as_tuple())


def select_order(
    y: WeeklySeries,
    exog: list[FlagSeries] | None,
    space: SearchSpace | None = None,
    fit_config=None,
) -> SearchResult:
    """Fit candidate orders and choose the converged fit with minimum AICc."""
    from .sarimax.model import FittedSarimax, fit  # local to avoid import cycle

    space = space or SearchSpace()
    exog = list(exog or [])

    fits: dict[tuple, FittedSarimax] = {}
    rows: dict[tuple, LeaderboardRow] = {}

    def evaluate(order: SarimaOrder) -> LeaderboardRow:
        key = order.as_tuple()
        if key in rows:
            return rows[key]
        try:
            fitted = fit(y, exog, order, config=fit_config)
            row = LeaderboardRow(order, fitted.aicc, fitted.loglik, fitted.converged)
            if fitted.converged:
                fits[key] = fitted
            else:
                row = LeaderboardRow(order, float("inf"), fitted.loglik, False)
        except (DataError, NumericalError, DegenerateSampleSize):
            row = LeaderboardRow(order, float("inf"), float("nan"), False)
        rows[key] = row
        return row

    if space.mode == "exhaustive":
        for order in space.candidates():
            evaluate(order)
    else:
        _stepwise(space, evaluate, rows)

    ranked = sorted(rows.values(), key=_sort_key)
    converged = [row for row in ranked if row.converged]
    if not converged:
        raise NoConvergedCandidate(
            f"no candidate converged out of {len(rows)} evaluated"
        )
    best = fits[converged[0].order.as_tuple()]
    return SearchResult(best=best, leaderboard=tuple(ranked), n_evaluated=len(rows))


def _stepwise(space: SearchSpace, evaluate, rows: dict) -> None:
    d0 = 1 if 1 in space.d_set else space.d_set[0]
    dd0 = 1 if 1 in space.D_set else space.D_set[0]
    seasonal = space.s >= 2 and (space.max_P > 0 or space.max_Q > 0 or 1 in space.D_set)
    raw_starts = [
        (2, d0, 2, 1, dd0, 1),
        (0, d0, 0, 0, dd0, 0),
        (1, d0, 0, 1, dd0, 0),
        (0, d0, 1, 0, dd0, 1),
    ]
    starts = []
    for p, d, q, pp, dd, qq in raw_starts:
        order = SarimaOrder(
            min(p, space.max_p),
            d,
            min(q, space.max_q),
            min(pp, space.max_P) if seasonal else 0,
            dd if seasonal else space.D_set[0],
            min(qq, space.max_Q) if seasonal else 0,
            space.s,
        )
        if space.contains(order) and order not in starts:
            starts.append(order)

    best_row = None
    for order in starts:
        row = evaluate(order)
        if best_row is None or _sort_key(row) < _sort_key(best_row):
            best_row = row

    since_improvement = 0
    while since_improvement <= STEPWISE_PATIENCE:
        moved = False
        for neighbor in _neighbors(best_row.order, space):
            fresh = neighbor.as_tuple() not in rows
            row = evaluate(neighbor)
            if fresh:
                since_improvement += 1
            if _sort_key(row) < _sort_key(best_row):
                best_row = row
                since_improvement = 0
                moved = True
                break
            if since_improvement > STEPWISE_PATIENCE:
                return
        if not moved:
            # all neighbors of the current optimum are evaluated and worse
            return


def _neighbors(order: SarimaOrder, space: SearchSpace) -> list[SarimaOrder]:
    out = []
    fields = ("p", "d", "q", "P", "D", "Q")
    for name in fields:
        for delta in (-1, 1):
            values = {f: getattr(order, f) for f in fields}
            values[name] += delta
            if values[name] < 0:
                continue
            try:
                candidate = SarimaOrder(s=space.s, **values)
            except BadParameter:
                continue
            if space.contains(candidate):
                out.append(candidate)
    return out
