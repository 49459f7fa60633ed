"""Euler-Maruyama simulation of CEV dynamics and reusable noise paths.

A :class:`NoisePath` fixes the Brownian increments so that many parameter
sets can be simulated against the same randomness (common random numbers).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .timeseries import PriceSeries

# Non-positive Euler steps are replaced by this fraction of s0.
FLOOR_FRACTION = 1e-8
DEFAULT_JUMPS = (0.9, 1.0, 1.1)


@dataclass(frozen=True)
class CevParams:
    mu: float
    sigma: float
    gamma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise InvalidInputError(f"sigma must be non-negative, got {self.sigma!r}")
        if not self.gamma >= 0:
            raise InvalidInputError(f"gamma must be non-negative, got {self.gamma!r}")


@dataclass(frozen=True)
class JumpFactor:
    y: float

    def __post_init__(self):
        if not self.y > 0:
            raise InvalidInputError(f"jump factor must be positive, got {self.y!r}")


@dataclass(frozen=True, eq=False)
class NoisePath:
    """Standard-normal increments drawn from PCG64 seeded with ``seed``."""

    seed: int
    draws: np.ndarray

    def __post_init__(self):
        draws = np.array(self.draws, dtype=np.float64)
        if draws.ndim != 1:
            raise InvalidInputError("noise draws must be one-dimensional")
        draws.setflags(write=False)
        object.__setattr__(self, "draws", draws)

    @classmethod
    def generate(cls, seed: int, n: int) -> NoisePath:
        if n < 0:
            raise InvalidInputError("noise length must be non-negative")
        rng = np.random.Generator(np.random.PCG64(seed))
        return cls(seed, rng.standard_normal(n))

    def __len__(self) -> int:
        return self.draws.size

    def take(self, n: int) -> np.ndarray:
        if n > self.draws.size:
            raise InvalidInputError(
                f"noise path has {self.draws.size} draws, {n} required"
            )
        return self.draws[:n]


def simulate_cev_batch(mu, sigma, gamma, s0, draws: np.ndarray, dt: float = 1.0) -> np.ndarray:
    """Simulate one CEV path per candidate against shared ``draws``.

    Parameters broadcast over the candidate axis. Returns an array of shape
    ``(len(draws) + 1, n_candidates)``; row ``t`` holds every candidate's
    price at bar ``t``.

    Each step is ``S + mu*S*dt + sigma*S**gamma*sqrt(dt)*eps``. Results that
    are not strictly positive (including NaN from overflow) are set to
    ``FLOOR_FRACTION * s0``.
    """
    mu, sigma, gamma, s0 = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(a, dtype=np.float64)) for a in (mu, sigma, gamma, s0))
    )
    floor = FLOOR_FRACTION * s0
    sqrt_dt = np.sqrt(dt)
    out = np.empty((draws.size + 1, mu.size))
    out[0] = s0
    with np.errstate(over="ignore", invalid="ignore"):
        for t, eps in enumerate(draws):
            s = out[t]
            nxt = s + mu * s * dt + sigma * np.power(s, gamma) * sqrt_dt * eps
            out[t + 1] = np.where(nxt > 0, nxt, floor)
    return out


def _check_start(s0: float, n_bars: int) -> None:
    if not s0 > 0:
        raise InvalidInputError(f"s0 must be positive, got {s0!r}")
    if n_bars < 1:
        raise InvalidInputError("n_bars must be positive")


def euler_cev_path(params: CevParams, s0: float, n_bars: int, noise: NoisePath, **series_kwargs) -> PriceSeries:
    """Euler-Maruyama path of ``dS = mu*S dt + sigma*S**gamma dW``.

    ``n_bars`` steps give ``n_bars + 1`` prices. Shares its kernel with the
    grid search, so a path simulated here is bitwise equal to the grid
    search's simulation of the same candidate.
    """
    _check_start(s0, n_bars)
    eps = noise.take(n_bars)
    path = simulate_cev_batch(params.mu, params.sigma, params.gamma, s0, eps)[:, 0]
    return PriceSeries.from_prices(path, **series_kwargs)


def gbm_euler_path(mu: float, sigma: float, s0: float, n_bars: int, noise: NoisePath, **series_kwargs) -> PriceSeries:
    """Euler step of GBM: ``S[t+1] = S[t] * (1 + mu + sigma*eps[t])``.

    Written in expanded form so that it agrees exactly with the CEV kernel at
    ``gamma = 1``.
    """
    _check_start(s0, n_bars)
    eps = noise.take(n_bars)
    out = np.empty(n_bars + 1)
    out[0] = s0
    floor = FLOOR_FRACTION * s0
    for t in range(n_bars):
        s = out[t]
        nxt = s + mu * s * 1.0 + sigma * s * 1.0 * eps[t]
        out[t + 1] = nxt if nxt > 0 else floor
    return PriceSeries.from_prices(out, **series_kwargs)


def apply_jump_initial(last_left_price: float, jump: JumpFactor) -> float:
    """Starting price of the post-break path: last pre-break price times the jump."""
    if not last_left_price > 0:
        raise InvalidInputError("last_left_price must be positive")
    return last_left_price * jump.y
