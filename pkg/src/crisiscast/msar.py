"""Two-regime Markov-switching autoregression on growth series.

Estimation is Baum-Welch EM: the E-step runs the Hamilton filter and Kim
smoother, the M-step solves one weighted least-squares problem per regime
and re-estimates the transition matrix from expected transition counts.
The likelihood conditions on the first `ar_order` observations.

The initial regime distribution is a free EM parameter (updated from the
smoothed first-step probabilities) rather than the stationary distribution
of the transition matrix; with a tied initial distribution the M-step no
longer maximizes the EM objective exactly and the per-iteration likelihood
can dip by more than numerical noise, which the monotonicity contract
forbids.

Regimes are relabeled after estimation so index 1 is the higher-variance
("COVID") regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadParameter,
    DegenerateRegime,
    DivisionByZeroValue,
    NonConvergence,
    SeriesTooShort,
)
from .series import WEEK, WeeklySeries

EM_REL_TOL = 1e-8
EM_MAX_ITER = 500
N_RESTARTS = 5
_RESTART_SEED = 19890613  # fixed: fit_msar must be deterministic
_MIN_RESPONSIBILITY = 1e-3


@dataclass(frozen=True)
class TransitionMatrix:
    p00: float
    p01: float
    p10: float
    p11: float

    def __post_init__(self) -> None:
        values = (self.p00, self.p01, self.p10, self.p11)
        if any(not (0.0 <= v <= 1.0) for v in values):
            raise BadParameter("transition probabilities must lie in [0, 1]")
        if abs(self.p00 + self.p01 - 1.0) > 1e-12 or abs(self.p10 + self.p11 - 1.0) > 1e-12:
            raise BadParameter("transition matrix rows must sum to 1")

    def as_array(self) -> np.ndarray:
        return np.array([[self.p00, self.p01], [self.p10, self.p11]])

    def stationary(self) -> np.ndarray:
        denom = self.p01 + self.p10
        if denom == 0.0:
            return np.array([0.5, 0.5])
        return np.array([self.p10 / denom, self.p01 / denom])


@dataclass(frozen=True)
class RegimeParams:
    intercept: float
    ar_coeffs: tuple[float, ...]
    sigma2: float


@dataclass(frozen=True)
class RegimeFit:
    regimes: tuple[RegimeParams, RegimeParams]
    trans: TransitionMatrix
    initial_dist: tuple[float, float]
    filtered_probs: np.ndarray  # (n_eff, 2)
    smoothed_probs: np.ndarray  # (n_eff, 2)
    loglik: float
    ar_order: int
    start_week: "object"  # Monday of the first modeled observation
    em_histories: tuple[tuple[float, ...], ...]  # loglik path per restart

    def __post_init__(self) -> None:
        for name in ("filtered_probs", "smoothed_probs"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_obs(self) -> int:
        return int(self.smoothed_probs.shape[0])

    def covid_probability(self) -> np.ndarray:
        """Smoothed probability of the high-variance regime, per week."""
        return np.asarray(self.smoothed_probs[:, 1])

    def weeks(self) -> list:
        return [self.start_week + i * WEEK for i in range(self.n_obs)]


def to_growth(y: WeeklySeries, mode: str = "weekly") -> WeeklySeries:
    """Relative growth series: week over week, or the same week a year ago."""
    if mode not in ("weekly", "yoy"):
        raise BadParameter(f"unknown growth mode: {mode!r}")
    lag = 1 if mode == "weekly" else 52
    if len(y) < lag + 1:
        raise SeriesTooShort(f"{mode} growth needs at least {lag + 1} observations")
    base = y.values[:-lag]
    if np.any(base == 0.0):
        bad = int(np.argmax(base == 0.0))
        raise DivisionByZeroValue(
            f"series {y.name!r} is zero at {y.week_at(bad).isoformat()}"
        )
    return WeeklySeries(
        name=f"{y.name}_growth_{mode}",
        start_week=y.start_week + lag * WEEK,
        values=y.values[lag:] / base - 1.0,
        transform="level",
    )


# ------------------------------------------------------- filter/smoother


def _regression_arrays(g: np.ndarray, ar_order: int) -> tuple[np.ndarray, np.ndarray]:
    n = g.size
    rows = n - ar_order
    x = np.ones((rows, ar_order + 1))
    for k in range(1, ar_order + 1):
        x[:, k] = g[ar_order - k : n - k]
    return x, g[ar_order:]


def _conditional_densities(
    x: np.ndarray, target: np.ndarray, regimes: tuple[RegimeParams, RegimeParams]
) -> np.ndarray:
    dens = np.empty((target.size, 2))
    for j, reg in enumerate(regimes):
        beta = np.concatenate([[reg.intercept], reg.ar_coeffs])
        resid = target - x @ beta
        dens[:, j] = np.exp(-0.5 * resid * resid / reg.sigma2) / math.sqrt(
            2.0 * math.pi * reg.sigma2
        )
    return dens


def hamilton_filter(
    densities: np.ndarray, trans: np.ndarray, initial: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Forward pass. Returns (filtered, one-step predicted, loglik)."""
    n = densities.shape[0]
    filtered = np.empty((n, 2))
    predicted = np.empty((n, 2))
    loglik = 0.0
    prob = np.asarray(initial, dtype=float)
    for t in range(n):
        predicted[t] = prob
        joint = prob * densities[t]
        step = joint.sum()
        if step <= 0.0 or not math.isfinite(step):
            return filtered, predicted, -math.inf
        filtered[t] = joint / step
        loglik += math.log(step)
        prob = filtered[t] @ trans
    return filtered, predicted, loglik


def kim_smoother(
    filtered: np.ndarray, trans: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Backward pass. Returns (smoothed, expected transition counts)."""
    n = filtered.shape[0]
    smoothed = np.empty_like(filtered)
    smoothed[-1] = filtered[-1]
    counts = np.zeros((2, 2))
    for t in range(n - 2, -1, -1):
        pred = filtered[t] @ trans  # P(S_{t+1} | info_t)
        ratio = np.where(pred > 0.0, smoothed[t + 1] / np.where(pred > 0.0, pred, 1.0), 0.0)
        joint = filtered[t][:, None] * trans * ratio[None, :]
        smoothed[t] = joint.sum(axis=1)
        counts += joint
    return smoothed, counts


# ------------------------------------------------------------------ EM


def _weighted_regime_update(
    x: np.ndarray, target: np.ndarray, weights: np.ndarray
) -> RegimeParams:
    w = np.maximum(weights, 0.0)
    total = w.sum()
    if total < _MIN_RESPONSIBILITY * target.size:
        raise DegenerateRegime(
            f"regime responsibility mass {total:.6f} below "
            f"{_MIN_RESPONSIBILITY} of sample"
        )
    sw = np.sqrt(w)
    beta, *_ = np.linalg.lstsq(x * sw[:, None], target * sw, rcond=None)
    resid = target - x @ beta
    sigma2 = float(np.dot(w, resid * resid) / total)
    if sigma2 <= 0.0 or not math.isfinite(sigma2):
        raise DegenerateRegime("regime variance collapsed to zero")
    return RegimeParams(
        intercept=float(beta[0]), ar_coeffs=tuple(float(b) for b in beta[1:]), sigma2=sigma2
    )


def _em_run(
    x: np.ndarray,
    target: np.ndarray,
    start: tuple[tuple[RegimeParams, RegimeParams], np.ndarray, np.ndarray],
) -> tuple:
    regimes, trans, initial = start
    history: list[float] = []
    previous = -math.inf
    converged = False
    filtered = smoothed = None
    loglik = -math.inf
    for _ in range(EM_MAX_ITER):
        dens = _conditional_densities(x, target, regimes)
        filtered, _, loglik = hamilton_filter(dens, trans, initial)
        if not math.isfinite(loglik):
            raise DegenerateRegime("likelihood vanished during EM")
        history.append(loglik)
        smoothed, counts = kim_smoother(filtered, trans)
        if abs(loglik - previous) <= EM_REL_TOL * (1.0 + abs(loglik)):
            converged = True
            break
        previous = loglik
        row_sums = counts.sum(axis=1)
        if np.any(row_sums <= 0.0):
            raise DegenerateRegime("a regime received no expected transitions")
        trans = counts / row_sums[:, None]
        initial = smoothed[0].copy()
        regimes = (
            _weighted_regime_update(x, target, smoothed[:, 0]),
            _weighted_regime_update(x, target, smoothed[:, 1]),
        )
    return regimes, trans, initial, filtered, smoothed, loglik, tuple(history), converged


def _initial_guesses(
    g: np.ndarray, ar_order: int, x: np.ndarray, target: np.ndarray
) -> tuple[tuple[RegimeParams, RegimeParams], np.ndarray, np.ndarray]:
    """Split the sample at the median rolling variance into tentative regimes."""
    window = max(4, min(8, target.size // 4))
    roll = np.array(
        [np.var(target[max(0, i - window) : i + 1]) for i in range(target.size)]
    )
    high = roll > np.median(roll)
    if high.all() or (~high).all():
        high = np.arange(target.size) >= target.size // 2
    regimes = []
    for mask in (~high, high):
        sel = np.where(mask)[0]
        if sel.size < ar_order + 2:
            sel = np.arange(target.size)
        beta, *_ = np.linalg.lstsq(x[sel], target[sel], rcond=None)
        resid = target[sel] - x[sel] @ beta
        sigma2 = float(np.mean(resid * resid))
        sigma2 = max(sigma2, 1e-10)
        regimes.append(
            RegimeParams(float(beta[0]), tuple(float(b) for b in beta[1:]), sigma2)
        )
    stay = 0.9
    trans = np.array([[stay, 1.0 - stay], [1.0 - stay, stay]])
    share = float(np.clip(high.mean(), 0.05, 0.95))
    initial = np.array([1.0 - share, share])
    return (regimes[0], regimes[1]), trans, initial


def _jitter_start(start, rng: np.random.Generator):
    regimes, trans, initial = start
    jittered = []
    for reg in regimes:
        scale = math.sqrt(reg.sigma2)
        jittered.append(
            RegimeParams(
                intercept=reg.intercept + rng.normal(0.0, 0.3 * scale + 1e-8),
                ar_coeffs=tuple(
                    c + rng.normal(0.0, 0.1) for c in reg.ar_coeffs
                ),
                sigma2=reg.sigma2 * math.exp(rng.normal(0.0, 0.4)),
            )
        )
    stay0 = float(np.clip(trans[0, 0] + rng.normal(0.0, 0.05), 0.5, 0.99))
    stay1 = float(np.clip(trans[1, 1] + rng.normal(0.0, 0.05), 0.5, 0.99))
    trans_j = np.array([[stay0, 1.0 - stay0], [1.0 - stay1, stay1]])
    return (jittered[0], jittered[1]), trans_j, initial.copy()


def fit_msar(g: WeeklySeries, ar_order: int = 1) -> RegimeFit:
    """EM fit of the two-regime switching AR model to a growth series."""
    if not isinstance(ar_order, (int, np.integer)) or not 0 <= ar_order <= 4:
        raise BadParameter("ar_order must be an integer in 0..4")
    values = g.values
    if values.size < 10 * (ar_order + 3):
        raise SeriesTooShort(
            f"msar with ar_order={ar_order} needs at least {10 * (ar_order + 3)} observations"
        )
    x, target = _regression_arrays(values, ar_order)
    base_start = _initial_guesses(values, ar_order, x, target)
    rng = np.random.default_rng(_RESTART_SEED)

    best = None
    histories: list[tuple[float, ...]] = []
    failures: list[str] = []
    for restart in range(N_RESTARTS):
        start = base_start if restart == 0 else _jitter_start(base_start, rng)
        try:
            outcome = _em_run(x, target, start)
        except DegenerateRegime as exc:
            failures.append(str(exc))
            continue
        *_, history, converged = outcome
        histories.append(history)
        if not converged:
            continue
        loglik = outcome[5]
        if best is None or loglik > best[5] + 1e-12:
            best = outcome
    if best is None:
        if not histories:
            raise DegenerateRegime(
                "every EM restart degenerated: " + "; ".join(failures[:2])
            )
        raise NonConvergence(f"EM failed to converge in {EM_MAX_ITER} iterations")

    regimes, trans, initial, filtered, smoothed, loglik, _, _ = best
    if regimes[0].sigma2 > regimes[1].sigma2:
        regimes = (regimes[1], regimes[0])
        trans = trans[::-1, ::-1].copy()
        initial = initial[::-1].copy()
        filtered = filtered[:, ::-1].copy()
        smoothed = smoothed[:, ::-1].copy()

    return RegimeFit(
        regimes=regimes,
        trans=TransitionMatrix(
            p00=float(trans[0, 0]),
            p01=float(trans[0, 1]),
            p10=float(trans[1, 0]),
            p11=float(trans[1, 1]),
        ),
        initial_dist=(float(initial[0]), float(initial[1])),
        filtered_probs=filtered,
        smoothed_probs=smoothed,
        loglik=loglik,
        ar_order=int(ar_order),
        start_week=g.start_week + ar_order * WEEK,
        em_histories=tuple(histories),
    )


@dataclass(frozen=True)
class RegimeSpan:
    start_week: "object"
    end_week: "object"
    label: str


def regime_report(fit: RegimeFit, threshold: float = 0.5) -> list[RegimeSpan]:
    """Maximal contiguous runs where the COVID-regime probability exceeds threshold."""
    if not 0.0 < threshold < 1.0:
        raise BadParameter("threshold must lie strictly inside (0, 1)")
    probs = fit.covid_probability()
    weeks = fit.weeks()
    spans = []
    run_start = None
    for i, p in enumerate(probs):
        if p > threshold and run_start is None:
            run_start = i
        elif p <= threshold and run_start is not None:
            spans.append(RegimeSpan(weeks[run_start], weeks[i - 1], "COVID"))
            run_start = None
    if run_start is not None:
        spans.append(RegimeSpan(weeks[run_start], weeks[-1], "COVID"))
    return spans
