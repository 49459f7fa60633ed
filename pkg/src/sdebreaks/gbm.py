"""Geometric Brownian motion: closed-form MLE and exact-scheme paths.

All quantities are per bar (dt = 1 bar); nothing is annualized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .sde import NoisePath
from .timeseries import PriceSeries, as_prices, log_returns


@dataclass(frozen=True)
class GbmParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise InvalidInputError(f"sigma must be non-negative, got {self.sigma!r}")


def estimate_gbm(series) -> GbmParams:
    """Fit drift and volatility from log returns.

    With ``r`` the ``n`` log returns::

        xbar  = sum(r) / n
        sigma = sqrt(sum((r - xbar)**2) / (n - 1))
        mu    = xbar + sigma**2 / 2
    """
    prices = as_prices(series)
    if prices.size < 3:
        raise InvalidInputError(f"estimate_gbm needs at least 3 prices, got {prices.size}")
    r = log_returns(prices)
    n = r.size
    xbar = np.sum(r) / n
    sigma = math.sqrt(np.sum((r - xbar) ** 2) / (n - 1))
    return GbmParams(mu=float(xbar + sigma**2 / 2), sigma=sigma)


def gbm_path(params: GbmParams, s0: float, n_bars: int, noise: NoisePath, **series_kwargs) -> PriceSeries:
    """Exact log-scheme path; ``n_bars`` steps give ``n_bars + 1`` prices.

    ``S[t+1] = S[t] * exp((mu - sigma**2/2) + sigma * eps[t])``
    """
    if not s0 > 0:
        raise InvalidInputError(f"s0 must be positive, got {s0!r}")
    if n_bars < 1:
        raise InvalidInputError("n_bars must be positive")
    eps = noise.take(n_bars)
    increments = (params.mu - params.sigma**2 / 2) + params.sigma * eps
    log_path = np.concatenate([[0.0], np.cumsum(increments)])
    return PriceSeries.from_prices(s0 * np.exp(log_path), **series_kwargs)
