"""Model orders, parameter containers and the stationarity reparameterization.

The optimizer works in an unconstrained space: each AR/MA block is a vector
of reals mapped through tanh to partial autocorrelations in (-1, 1) and then
through the Durbin-Levinson recursion to polynomial coefficients. Every
image of that map is a stationary (or, negated, invertible) polynomial, so
the likelihood never sees an explosive parameter vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import BadParameter, NonStationaryParams

MAX_PQ = 5
MAX_SEASONAL = 2
MAX_DIFF = 2


@dataclass(frozen=True)
class SarimaOrder:
    """(p, d, q) regular and (P, D, Q) seasonal orders with period s."""

    p: int
    d: int
    q: int
    P: int = 0
    D: int = 0
    Q: int = 0
    s: int = 52

    def __post_init__(self) -> None:
        for name in ("p", "d", "q", "P", "D", "Q", "s"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise BadParameter(f"order field {name} must be an integer")
            object.__setattr__(self, name, int(value))
        if min(self.p, self.d, self.q, self.P, self.D, self.Q) < 0:
            raise BadParameter("order fields must be non-negative")
        if self.p > MAX_PQ or self.q > MAX_PQ:
            raise BadParameter(f"p and q are limited to {MAX_PQ}")
        if self.P > MAX_SEASONAL or self.Q > MAX_SEASONAL:
            raise BadParameter(f"P and Q are limited to {MAX_SEASONAL}")
        if self.d > MAX_DIFF or self.D > MAX_DIFF:
            raise BadParameter(f"d and D are limited to {MAX_DIFF}")
        if self.s < 1:
            raise BadParameter("seasonal period s must be positive")
        if self.P + self.D + self.Q > 0 and self.s < 2:
            raise BadParameter("seasonal terms need s >= 2")

    @property
    def n_arma_params(self) -> int:
        return self.p + self.q + self.P + self.Q

    def as_tuple(self) -> tuple[int, int, int, int, int, int, int]:
        return (self.p, self.d, self.q, self.P, self.D, self.Q, self.s)


@dataclass(frozen=True)
class SarimaxParams:
    """A full parameter point: coefficient blocks, regression terms, variance."""

    ar: tuple[float, ...] = ()
    ma: tuple[float, ...] = ()
    seasonal_ar: tuple[float, ...] = ()
    seasonal_ma: tuple[float, ...] = ()
    intercept: float = 0.0
    betas: tuple[float, ...] = ()
    sigma2: float = 1.0

    def __post_init__(self) -> None:
        for name in ("ar", "ma", "seasonal_ar", "seasonal_ma", "betas"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not np.isfinite(self.sigma2) or self.sigma2 <= 0.0:
            raise BadParameter("sigma2 must be a positive real")

    def check_matches(self, order: SarimaOrder, n_exog: int) -> None:
        dims = (len(self.ar), len(self.ma), len(self.seasonal_ar), len(self.seasonal_ma))
        if dims != (order.p, order.q, order.P, order.Q):
            raise BadParameter(f"coefficient blocks {dims} do not match order {order.as_tuple()}")
        if len(self.betas) != n_exog:
            raise BadParameter(f"expected {n_exog} betas, got {len(self.betas)}")


# --------------------------------------------- polynomial expansion


def expand_polynomials(
    order: SarimaOrder, params: SarimaxParams
) -> tuple[np.ndarray, np.ndarray]:
    """Multiply regular and seasonal factors into full lag polynomials.

    Returns (ar_full, ma_full) in coefficient convention
    phi(B) = 1 - sum ar_full[k] B^(k+1), theta(B) = 1 + sum ma_full[k] B^(k+1).
    """
    ar_poly = np.concatenate([[1.0], -np.asarray(params.ar, dtype=float)])
    sar_poly = np.zeros(order.P * order.s + 1)
    sar_poly[0] = 1.0
    for i, coeff in enumerate(params.seasonal_ar):
        sar_poly[(i + 1) * order.s] = -coeff
    ma_poly = np.concatenate([[1.0], np.asarray(params.ma, dtype=float)])
    sma_poly = np.zeros(order.Q * order.s + 1)
    sma_poly[0] = 1.0
    for i, coeff in enumerate(params.seasonal_ma):
        sma_poly[(i + 1) * order.s] = coeff
    ar_full = -np.convolve(ar_poly, sar_poly)[1:]
    ma_full = np.convolve(ma_poly, sma_poly)[1:]
    return ar_full, ma_full


def differencing_polynomial(d: int, D: int, s: int) -> np.ndarray:
    """Coefficients of (1-B)^d (1-B^s)^D, constant term first."""
    poly = np.array([1.0])
    for _ in range(d):
        poly = np.convolve(poly, [1.0, -1.0])
    seasonal = np.zeros(s + 1)
    seasonal[0], seasonal[s] = 1.0, -1.0
    for _ in range(D):
        poly = np.convolve(poly, seasonal)
    return poly


def integration_weights(d: int, D: int, s: int, n_terms: int) -> np.ndarray:
    """Power-series coefficients of 1 / ((1-B)^d (1-B^s)^D), length n_terms."""
    delta = differencing_polynomial(d, D, s)
    psi = np.zeros(n_terms)
    psi[0] = 1.0
    for k in range(1, n_terms):
        upper = min(k, delta.size - 1)
        psi[k] = -float(np.dot(delta[1 : upper + 1], psi[k - upper : k][::-1]))
    return psi


# -------------------------------------- stationarity reparameterization


def pacf_to_coeffs(pacf: np.ndarray) -> np.ndarray:
    """Durbin-Levinson: partial autocorrelations in (-1,1) to AR coefficients."""
    pacf = np.asarray(pacf, dtype=float)
    coeffs = np.zeros(0)
    for k in range(pacf.size):
        new = np.empty(k + 1)
        new[k] = pacf[k]
        new[:k] = coeffs - pacf[k] * coeffs[::-1]
        coeffs = new
    return coeffs


def coeffs_to_pacf(coeffs: np.ndarray) -> np.ndarray:
    """Inverse Durbin-Levinson; input must be stationary."""
    work = np.asarray(coeffs, dtype=float).copy()
    p = work.size
    pacf = np.empty(p)
    for k in range(p - 1, -1, -1):
        a = work[k]
        pacf[k] = a
        denom = 1.0 - a * a
        if denom <= 0.0:
            raise NonStationaryParams("coefficients on or outside the stationarity boundary")
        work = (work[:k] + a * work[:k][::-1]) / denom
    return pacf


def unconstrained_to_coeffs(z: np.ndarray) -> np.ndarray:
    return pacf_to_coeffs(np.tanh(np.asarray(z, dtype=float)))


def coeffs_to_unconstrained(coeffs: np.ndarray) -> np.ndarray:
    pacf = np.clip(coeffs_to_pacf(coeffs), -1.0 + 1e-9, 1.0 - 1e-9)
    return np.arctanh(pacf)


def roots_outside_unit_circle(coeffs: np.ndarray, sign: float) -> bool:
    """Check 1 - sign * (c1 B + c2 B^2 + ...) has all roots outside |z|=1.

    sign=+1 treats `coeffs` as AR coefficients, sign=-1 as MA coefficients
    (theta(B) = 1 + sum c_k B^k is invertible iff -c is 'stationary').
    """
    coeffs = sign * np.asarray(coeffs, dtype=float)
    if coeffs.size == 0 or np.all(coeffs == 0.0):
        return True
    poly = np.concatenate([[1.0], -coeffs])[::-1]
    roots = np.roots(poly)
    return bool(np.all(np.abs(roots) > 1.0))


def validate_stationarity(order: SarimaOrder, params: SarimaxParams) -> None:
    checks = (
        (params.ar, 1.0, "AR"),
        (params.seasonal_ar, 1.0, "seasonal AR"),
        (params.ma, -1.0, "MA"),
        (params.seasonal_ma, -1.0, "seasonal MA"),
    )
    for coeffs, sign, label in checks:
        if not roots_outside_unit_circle(np.asarray(coeffs), sign):
            raise NonStationaryParams(f"{label} polynomial has a root inside the unit circle")


# ----------------------------------------------- optimizer vector layout


@dataclass(frozen=True)
class ParamLayout:
    """Maps the optimizer's flat unconstrained vector onto coefficient blocks."""

    order: SarimaOrder
    blocks: tuple[tuple[str, int], ...] = field(init=False)

    def __post_init__(self) -> None:
        order = self.order
        blocks = (
            ("ar", order.p),
            ("ma", order.q),
            ("seasonal_ar", order.P),
            ("seasonal_ma", order.Q),
        )
        object.__setattr__(self, "blocks", blocks)

    @property
    def size(self) -> int:
        return sum(width for _, width in self.blocks)

    def to_coeff_blocks(self, z: np.ndarray) -> dict[str, tuple[float, ...]]:
        z = np.asarray(z, dtype=float)
        if z.size != self.size:
            raise BadParameter(f"expected {self.size} raw parameters, got {z.size}")
        out: dict[str, tuple[float, ...]] = {}
        pos = 0
        for name, width in self.blocks:
            raw = z[pos : pos + width]
            coeffs = unconstrained_to_coeffs(raw)
            if name in ("ma", "seasonal_ma"):
                coeffs = -coeffs
            out[name] = tuple(coeffs)
            pos += width
        return out

    def from_coeff_blocks(self, params: SarimaxParams) -> np.ndarray:
        parts = []
        for name, _ in self.blocks:
            coeffs = np.asarray(getattr(params, name), dtype=float)
            if name in ("ma", "seasonal_ma"):
                coeffs = -coeffs
            parts.append(coeffs_to_unconstrained(coeffs))
        return np.concatenate(parts) if parts else np.zeros(0)
