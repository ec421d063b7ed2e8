"""Drivers, payoffs and the closed-form Black-Scholes oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .forward import AugmentationKind
from .numkit import DimensionError


class ParameterError(ValueError):
    pass


# ---------------------------------------------------------------- drivers
#
# A driver is called as driver(t, x, y, z) with x of shape (M, d), y of
# shape (M,) and z of shape (M, q); it returns shape (M,).

@dataclass(frozen=True)
class ZeroDriver:
    def __call__(self, t, x, y, z):
        return np.zeros_like(np.asarray(y, dtype=float))


@dataclass(frozen=True)
class LinearRiskNeutral:
    """``f = -(y r + z theta)``."""

    r: float
    theta: float

    def __call__(self, t, x, y, z):
        return -(self.r * np.asarray(y) + self.theta * np.asarray(z)[..., 0])


@dataclass(frozen=True)
class DifferentialRates:
    """Lending at ``r``, borrowing at ``R >= r``:

    ``f = -(y r + z theta - (y - z/sigma)^- (R - r))`` with ``theta = (mu - r)/sigma``.
    """

    r: float
    R: float
    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma == 0:
            raise ParameterError("sigma must be nonzero")
        if self.sigma < 0:
            raise ParameterError("sigma must be positive")
        if self.R < self.r:
            raise ParameterError("borrowing rate R must be >= lending rate r")

    @property
    def theta(self) -> float:
        return (self.mu - self.r) / self.sigma

    def lipschitz(self) -> float:
        return self.r + abs(self.theta) + (self.R - self.r) * (1.0 + 1.0 / self.sigma)

    def __call__(self, t, x, y, z):
        y = np.asarray(y)
        z0 = np.asarray(z)[..., 0]
        borrowed = np.maximum(z0 / self.sigma - y, 0.0)
        return -(y * self.r + z0 * self.theta - borrowed * (self.R - self.r))


def eval_driver(driver, t, x, y, z):
    """Scalar convenience wrapper around a driver's batch call."""
    out = driver(t, np.atleast_2d(x), np.atleast_1d(y), np.atleast_2d(z))
    return float(out[0]) if np.ndim(y) == 0 else out


# ---------------------------------------------------------------- payoffs
#
# A payoff is called on terminal augmented states of shape (M, d') and
# declares the augmentation it needs.

@dataclass(frozen=True)
class Call:
    strike: float
    augmentation: AugmentationKind = AugmentationKind.VANILLA

    def __post_init__(self):
        if self.strike <= 0:
            raise ParameterError("strike must be positive")

    def __call__(self, p):
        return np.maximum(_col(p, 0) - self.strike, 0.0)


@dataclass(frozen=True)
class CallsCombination:
    """Long one call at ``k1``, short two calls at ``k2``."""

    k1: float
    k2: float
    augmentation: AugmentationKind = AugmentationKind.VANILLA

    def __post_init__(self):
        if not 0 < self.k1 < self.k2:
            raise ParameterError("need 0 < k1 < k2")

    def __call__(self, p):
        s = _col(p, 0)
        return np.maximum(s - self.k1, 0.0) - 2.0 * np.maximum(s - self.k2, 0.0)


@dataclass(frozen=True)
class AsianCall:
    """Call on the average carried in the second state coordinate."""

    strike: float
    augmentation: AugmentationKind = AugmentationKind.ASIAN_AVERAGE

    def __post_init__(self):
        if self.strike <= 0:
            raise ParameterError("strike must be positive")

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape[-1] < 2:
            raise DimensionError("Asian payoff needs the running-average coordinate")
        return np.maximum(p[..., 1] - self.strike, 0.0)


def _col(p, j):
    return np.asarray(p, dtype=float)[..., j]


def eval_payoff(payoff, p_n):
    out = payoff(np.asarray(p_n, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------- oracle

def _norm_cdf(x: float) -> float:
    # erfc keeps full relative accuracy in the lower tail
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def black_scholes_call(s0: float, strike: float, r: float, sigma: float, maturity: float) -> float:
    """European call value in the Black-Scholes model."""
    if min(s0, strike, sigma, maturity) <= 0:
        raise ParameterError("s0, strike, sigma and maturity must be positive")
    vol = sigma * math.sqrt(maturity)
    d1 = (math.log(s0 / strike) + (r + 0.5 * sigma ** 2) * maturity) / vol
    d2 = d1 - vol
    return s0 * _norm_cdf(d1) - strike * math.exp(-r * maturity) * _norm_cdf(d2)


def combination_bounds(s0, k1, k2, r, R, sigma, maturity) -> tuple[float, float, float, float]:
    """``BS1(R)-2BS2(R), BS1(r)-2BS2(r), BS1(r)-2BS2(R), BS1(R)-2BS2(r)``.

    The first three bound the differential-rates price from below, the last
    from above.
    """
    def bs(k, rate):
        return black_scholes_call(s0, k, rate, sigma, maturity)

    return (bs(k1, R) - 2 * bs(k2, R), bs(k1, r) - 2 * bs(k2, r),
            bs(k1, r) - 2 * bs(k2, R), bs(k1, R) - 2 * bs(k2, r))
