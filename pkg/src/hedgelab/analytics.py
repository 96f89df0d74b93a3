"""Closed-form Black-Scholes call pricing and greeks.

The price signal of every instrument is the classic call formula with a
single flat volatility. A strike of zero denotes the underlying-equivalent
instrument and is special-cased exactly (price = spot, delta = 1, gamma = 0)
because d1 diverges as the strike goes to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class OptionSpec:
    """One European call: strike, maturity and its slot in the instrument panel.

    ``index`` 0 is the hedged option, 1..M are hedging instruments.
    """

    strike: float
    maturity: float
    index: int = 0

    def __post_init__(self):
        if not math.isfinite(self.strike) or self.strike < 0.0:
            raise DomainError(f"strike must be finite and >= 0, got {self.strike}")
        if not math.isfinite(self.maturity) or self.maturity <= 0.0:
            raise DomainError(f"maturity must be finite and > 0, got {self.maturity}")
        if self.index < 0:
            raise DomainError(f"instrument index must be >= 0, got {self.index}")


@dataclass(frozen=True)
class MarketParams:
    """Pricing-model parameters: flat rate and flat volatility."""

    rate: float = 0.0
    pricing_vol: float = 0.2

    def __post_init__(self):
        if not math.isfinite(self.pricing_vol) or self.pricing_vol <= 0.0:
            raise DomainError(f"pricing_vol must be > 0, got {self.pricing_vol}")
        if not math.isfinite(self.rate):
            raise DomainError("rate must be finite")


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / SQRT_2PI


def _check_spot_time(spot: float, opt: OptionSpec, t: float) -> float:
    """Validate scalar inputs, return time to expiry."""
    if not math.isfinite(spot) or spot <= 0.0:
        raise DomainError(f"spot must be finite and > 0, got {spot}")
    if not math.isfinite(t) or t < 0.0:
        raise DomainError(f"valuation time must be >= 0, got {t}")
    if t >= opt.maturity:
        raise DomainError(f"valuation time {t} is not before maturity {opt.maturity}")
    return opt.maturity - t


def d1(spot: float, opt: OptionSpec, mkt: MarketParams, t: float) -> float:
    """d1 = (ln(S/K) + (r + sigma^2/2) tau) / (sigma sqrt(tau)); strike must be > 0."""
    tau = _check_spot_time(spot, opt, t)
    if opt.strike == 0.0:
        raise DomainError("d1 is undefined for the zero-strike instrument")
    sig = mkt.pricing_vol * math.sqrt(tau)
    return (math.log(spot / opt.strike) + (mkt.rate + 0.5 * mkt.pricing_vol**2) * tau) / sig


def bs_price(spot: float, opt: OptionSpec, mkt: MarketParams, t: float) -> float:
    """European call value at time t for time-to-expiry tau = T - t."""
    tau = _check_spot_time(spot, opt, t)
    if opt.strike == 0.0:
        return spot
    x = d1(spot, opt, mkt, t)
    sig = mkt.pricing_vol * math.sqrt(tau)
    disc = opt.strike * math.exp(-mkt.rate * tau)
    return spot * norm_cdf(x) - disc * norm_cdf(x - sig)


def bs_delta(spot: float, opt: OptionSpec, mkt: MarketParams, t: float) -> float:
    """Call delta N(d1); exactly 1 for the zero-strike instrument."""
    _check_spot_time(spot, opt, t)
    if opt.strike == 0.0:
        return 1.0
    return norm_cdf(d1(spot, opt, mkt, t))


def bs_gamma(spot: float, opt: OptionSpec, mkt: MarketParams, t: float) -> float:
    """Call gamma N'(d1) / (S sigma sqrt(tau)); exactly 0 for the zero-strike instrument."""
    tau = _check_spot_time(spot, opt, t)
    if opt.strike == 0.0:
        return 0.0
    sig = mkt.pricing_vol * math.sqrt(tau)
    return norm_pdf(d1(spot, opt, mkt, t)) / (spot * sig)


def greeks_grid(spot, tau, opt: OptionSpec, mkt: MarketParams):
    """Vectorised (price, delta, gamma) for spots >= 0 on a time grid.

    ``spot`` is (P, m) or (m,), ``tau`` is (m,) or scalar, all tau > 0.
    Unlike the scalar operations this accepts spot == 0, the absorbing
    state of zero-initial-price paths, valuing positive-strike calls at 0.
    """
    spot = np.asarray(spot, dtype=np.float64)
    squeeze = spot.ndim == 1
    spot2 = np.ascontiguousarray(np.atleast_2d(spot))
    tau = np.atleast_1d(np.asarray(tau, dtype=np.float64))
    if tau.shape == (1,) and spot2.shape[1] != 1:
        tau = np.full(spot2.shape[1], tau[0])
    if np.any(tau <= 0.0):
        raise DomainError("all times to expiry must be > 0")
    if tau.shape[0] != spot2.shape[1]:
        raise DomainError("tau length does not match spot columns")
    price, delta, gamma = kernels.bs_grid(
        spot2, tau, opt.strike, mkt.rate, mkt.pricing_vol
    )
    if squeeze:
        return price[0], delta[0], gamma[0]
    return price, delta, gamma
