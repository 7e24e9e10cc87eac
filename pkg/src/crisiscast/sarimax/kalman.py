"""Kalman filtering of an ARMA process in its companion state-space form.

For full AR coefficients a_1..a_p* and MA coefficients b_1..b_q* the state
dimension is m = max(p*, q*+1); the transition matrix is the companion
matrix with (a_1..a_m) in the first column, the shock loading is
R = (1, b_1, .., b_{m-1})' and the observation picks the first state entry.
The filter runs with unit innovation variance so sigma2 can be concentrated
out of the likelihood afterwards.

Transition products exploit the companion structure: T x costs O(m) and
T P costs O(m^2), which matters because seasonal models at s=52 push m
past 100. Once the predicted state covariance stops changing, the gain is
frozen and each step collapses to O(m).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import linalg as sla

LOG_2PI = math.log(2.0 * math.pi)

# predicted-covariance convergence threshold for gain freezing
_STEADY_TOL = 1e-12
_MIN_VARIANCE = 1e-300


class FilterFailure(Exception):
    """Internal signal: non-finite or non-positive innovation variance."""


class ArmaKalman:
    def __init__(self, ar_full: np.ndarray, ma_full: np.ndarray):
        ar_full = np.asarray(ar_full, dtype=float)
        ma_full = np.asarray(ma_full, dtype=float)
        m = max(ar_full.size, ma_full.size + 1, 1)
        self.m = m
        self.phi = np.zeros(m)
        self.phi[: ar_full.size] = ar_full
        self.r_vec = np.zeros(m)
        self.r_vec[0] = 1.0
        self.r_vec[1 : ma_full.size + 1] = ma_full
        self.rr = np.outer(self.r_vec, self.r_vec)
        self._p0: np.ndarray | None = None

    # companion products ------------------------------------------------

    def t_dot(self, x: np.ndarray) -> np.ndarray:
        out = np.empty_like(x)
        out[:-1] = x[1:]
        out[-1] = 0.0
        out += self.phi * x[0]
        return out

    def t_mat(self, p: np.ndarray) -> np.ndarray:
        out = np.empty_like(p)
        out[:-1] = p[1:]
        out[-1] = 0.0
        out += np.outer(self.phi, p[0])
        return out

    def transition_matrix(self) -> np.ndarray:
        t = np.zeros((self.m, self.m))
        t[:, 0] = self.phi
        for i in range(self.m - 1):
            t[i, i + 1] = 1.0
        return t

    # initialization ----------------------------------------------------

    def stationary_covariance(self) -> np.ndarray:
        if self._p0 is not None:
            return self._p0
        if self.m == 1:
            denom = 1.0 - self.phi[0] ** 2
            if denom <= 0.0:
                raise FilterFailure("unit-root AR coefficient")
            p0 = np.array([[self.rr[0, 0] / denom]])
        else:
            t = self.transition_matrix()
            method = "direct" if self.m < 10 else "bilinear"
            try:
                p0 = sla.solve_discrete_lyapunov(t, self.rr, method=method)
            except (ValueError, np.linalg.LinAlgError) as exc:
                raise FilterFailure(f"stationary covariance solve failed: {exc}") from exc
            if not np.all(np.isfinite(p0)):
                raise FilterFailure("stationary covariance not finite")
            p0 = 0.5 * (p0 + p0.T)
        self._p0 = p0
        return p0

    # filtering ---------------------------------------------------------

    def filter(self, y: np.ndarray, collect_innovations: bool = False):
        """One pass over y with unit innovation variance.

        Returns a FilterResult with the innovation sum of squares terms,
        the predicted state/covariance after the last observation and,
        when requested, the per-step innovations and their variances.
        """
        y = np.asarray(y, dtype=float)
        n = y.size
        m = self.m
        if m == 1:
            return self._filter_scalar(y, collect_innovations)
        phi = self.phi
        a = np.zeros(m)
        p = self.stationary_covariance().copy()
        k = np.zeros(m)
        f = 0.0
        ssq = 0.0
        sum_log_f = 0.0
        v_arr = np.empty(n) if collect_innovations else None
        f_arr = np.empty(n) if collect_innovations else None
        steady = False
        for t in range(n):
            if not steady:
                f = p[0, 0]
                if not (f > _MIN_VARIANCE) or not math.isfinite(f):
                    raise FilterFailure("innovation variance collapsed")
                k = self.t_dot(np.ascontiguousarray(p[:, 0])) / f
                tp = self.t_mat(p)
                p_next = self.t_mat(tp.T) + self.rr - np.outer(k, k) * f
                p_next = 0.5 * (p_next + p_next.T)
                if float(np.max(np.abs(p_next - p))) < _STEADY_TOL * (1.0 + abs(f)):
                    steady = True
                p = p_next
            v = y[t] - a[0]
            a = self.t_dot(a)
            a += k * v
            ssq += v * v / f
            sum_log_f += math.log(f)
            if collect_innovations:
                v_arr[t] = v
                f_arr[t] = f
        return FilterResult(
            n=n,
            ssq=ssq,
            sum_log_f=sum_log_f,
            predicted_state=a,
            predicted_cov=p,
            innovations=v_arr,
            innovation_vars=f_arr,
        )

    def _filter_scalar(self, y: np.ndarray, collect_innovations: bool):
        """m=1 fast path (AR(1) or pure noise): plain float recursion."""
        n = y.size
        phi = float(self.phi[0])
        rr = float(self.rr[0, 0])
        denom = 1.0 - phi * phi
        if denom <= 0.0:
            raise FilterFailure("unit-root AR coefficient")
        p = rr / denom
        a = 0.0
        ssq = 0.0
        sum_log_f = 0.0
        v_arr = np.empty(n) if collect_innovations else None
        f_arr = np.empty(n) if collect_innovations else None
        f = p
        k = phi
        steady = False
        log = math.log
        for t in range(n):
            if not steady:
                f = p
                if not (f > _MIN_VARIANCE) or not math.isfinite(f):
                    raise FilterFailure("innovation variance collapsed")
                k = phi  # T P Z' / F = phi * p / p
                p_next = phi * p * phi + rr - k * k * f
                if abs(p_next - p) < _STEADY_TOL * (1.0 + abs(f)):
                    steady = True
                p = p_next
            v = y[t] - a
            a = phi * a + k * v
            ssq += v * v / f
            sum_log_f += log(f)
            if collect_innovations:
                v_arr[t] = v
                f_arr[t] = f
        return FilterResult(
            n=n,
            ssq=ssq,
            sum_log_f=sum_log_f,
            predicted_state=np.array([a]),
            predicted_cov=np.array([[p]]),
            innovations=v_arr,
            innovation_vars=f_arr,
        )

    def forecast_moments(
        self, state: np.ndarray, cov: np.ndarray, horizon: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """Forecast means and the full forecast covariance (unit variance).

        cov(e_i, e_j) = (T^(j-i) P_i)[0, 0] for i <= j, with the state error
        covariance propagated as P_{i+1} = T P_i T' + R R'.
        """
        means = np.empty(horizon)
        sigma = np.empty((horizon, horizon))
        a = state.copy()
        p = cov.copy()
        for i in range(horizon):
            means[i] = a[0]
            a = self.t_dot(a)
            x = np.ascontiguousarray(p[:, 0])
            sigma[i, i] = x[0]
            for j in range(i + 1, horizon):
                x = self.t_dot(x)
                sigma[i, j] = x[0]
                sigma[j, i] = x[0]
            tp = self.t_mat(p)
            p = self.t_mat(tp.T) + self.rr
            p = 0.5 * (p + p.T)
        return means, sigma


class FilterResult:
    __slots__ = (
        "n",
        "ssq",
        "sum_log_f",
        "predicted_state",
        "predicted_cov",
        "innovations",
        "innovation_vars",
    )

    def __init__(self, n, ssq, sum_log_f, predicted_state, predicted_cov, innovations, innovation_vars):
        self.n = n
        self.ssq = ssq
        self.sum_log_f = sum_log_f
        self.predicted_state = predicted_state
        self.predicted_cov = predicted_cov
        self.innovations = innovations
        self.innovation_vars = innovation_vars

    def concentrated_loglik(self) -> tuple[float, float]:
        """(loglik, sigma2_hat) with sigma2 concentrated out."""
        if self.n == 0:
            raise FilterFailure("cannot evaluate likelihood on an empty series")
        sigma2 = self.ssq / self.n
        if not (sigma2 > _MIN_VARIANCE) or not math.isfinite(sigma2):
            raise FilterFailure("concentrated variance collapsed to zero")
        loglik = -0.5 * self.n * (LOG_2PI + 1.0 + math.log(sigma2)) - 0.5 * self.sum_log_f
        return loglik, sigma2

    def loglik_at(self, sigma2: float) -> float:
        """Exact log-likelihood at an explicit innovation variance."""
        return (
            -0.5 * self.n * (LOG_2PI + math.log(sigma2))
            - 0.5 * self.sum_log_f
            - 0.5 * self.ssq / sigma2
        )
