"""Exhaustive grid-search calibration of CEV and jump-CEV models.

Every lattice candidate is simulated against one shared noise path and scored
pathwise against the observed series. The winner is the candidate with the
smallest objective; ties go to the smallest lexicographic grid index, which
makes the result independent of evaluation order and of parallelism.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .sde import DEFAULT_JUMPS, CevParams, JumpFactor, NoisePath, apply_jump_initial, simulate_cev_batch
from .timeseries import EventWindow, as_prices, arithmetic_diffs, log_returns

DEFAULT_COUNTS = (20, 30, 21)
DEFAULT_GAMMA_RANGE = (0.0, 2.0)
DEFAULT_KL_BINS = 20
SIGMA_FALLBACK = (1e-8, 1e-2)
CHUNK_SIZE = 2048


class ObjectiveKind(str, enum.Enum):
    MSE = "mse"
    MAPE = "mape"
    KL = "kl"


# ---------------------------------------------------------------------------
# Search intervals


def mu_interval(series) -> tuple[float, float]:
    """Drift range ``mean(z) +/- 5*sd(z)/n`` over arithmetic diffs ``z``.

    ``sd`` uses the n-1 denominator. A zero sd is replaced by a half-width of
    ``max(|mean|, 1) * 1e-6``.
    """
    prices = as_prices(series)
    if prices.size < 3:
        raise InvalidInputError(f"mu_interval needs at least 3 prices, got {prices.size}")
    z = arithmetic_diffs(prices)
    n = z.size
    center = float(np.mean(z))
    sd = float(np.std(z, ddof=1))
    half = 5.0 * sd / n if sd > 0 else max(abs(center), 1.0) * 1e-6
    return center - half, center + half


def sigma_point(series) -> float:
    """Population (1/n) standard deviation of log returns."""
    r = log_returns(series)
    ybar = np.sum(r) / r.size
    return math.sqrt(np.sum((r - ybar) ** 2) / r.size)


def sigma_interval(sigma_hat: float) -> tuple[float, float]:
    if sigma_hat < 0:
        raise InvalidInputError("sigma_hat must be non-negative")
    if sigma_hat == 0:
        return SIGMA_FALLBACK
    return sigma_hat / 10, sigma_hat * 25


# ---------------------------------------------------------------------------
# Lattice


def _strictly_increasing(values: np.ndarray) -> bool:
    return bool(np.all(np.diff(values) > 0))


@dataclass(frozen=True, eq=False)
class GridSpec:
    mu_values: np.ndarray
    sigma_values: np.ndarray
    gamma_values: np.ndarray
    jump_values: np.ndarray = DEFAULT_JUMPS

    def __post_init__(self):
        for name in ("mu_values", "sigma_values", "gamma_values", "jump_values"):
            axis = np.array(getattr(self, name), dtype=np.float64).ravel()
            if axis.size == 0:
                raise InvalidInputError(f"{name} is empty")
            if not np.all(np.isfinite(axis)) or not _strictly_increasing(axis):
                raise InvalidInputError(f"{name} must be finite and strictly increasing")
            axis.setflags(write=False)
            object.__setattr__(self, name, axis)
        if self.sigma_values[0] <= 0:
            raise InvalidInputError("sigma_values must be positive")
        if self.gamma_values[0] < 0:
            raise InvalidInputError("gamma_values must be non-negative")
        if self.jump_values[0] <= 0:
            raise InvalidInputError("jump_values must be positive")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.mu_values.size, self.sigma_values.size, self.gamma_values.size

    @property
    def n_candidates(self) -> int:
        return math.prod(self.shape)

    def candidate(self, index: int) -> CevParams:
        """CevParams at a mu-major lexicographic lattice index."""
        i, j, k = np.unravel_index(index, self.shape)
        return CevParams(
            float(self.mu_values[i]), float(self.sigma_values[j]), float(self.gamma_values[k])
        )

    def flat_axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-candidate (mu, sigma, gamma) vectors in lexicographic order."""
        mu, sigma, gamma = np.meshgrid(
            self.mu_values, self.sigma_values, self.gamma_values, indexing="ij"
        )
        return mu.ravel(), sigma.ravel(), gamma.ravel()


def _axis(lo: float, hi: float, count: int) -> np.ndarray:
    if count < 1:
        raise InvalidInputError("axis counts must be at least 1")
    if count == 1:
        return np.array([(lo + hi) / 2])
    return np.linspace(lo, hi, count)


def build_grid(
    series,
    counts: Sequence[int] = DEFAULT_COUNTS,
    gamma_range: tuple[float, float] = DEFAULT_GAMMA_RANGE,
    jump_values: Sequence[float] = DEFAULT_JUMPS,
    mu_range: tuple[float, float] | None = None,
    sigma_range: tuple[float, float] | None = None,
    relative_mu: bool = False,
) -> GridSpec:
    """Lattice from data-derived intervals.

    ``mu_range``/``sigma_range`` override the intervals computed from
    ``series``. A single point on an axis sits at the interval midpoint.

    The drift interval is in price units per bar, while the CEV drift acts on
    ``mu * S``. ``relative_mu`` divides the interval by the series' first
    price so the axis is a relative rate instead.
    """
    n_mu, n_sigma, n_gamma = counts
    if mu_range is None:
        mu_range = mu_interval(series)
        if relative_mu:
            first = float(as_prices(series)[0])
            mu_range = (mu_range[0] / first, mu_range[1] / first)
    if sigma_range is None:
        sigma_range = sigma_interval(sigma_point(series))
    return GridSpec(
        _axis(*mu_range, n_mu),
        _axis(*sigma_range, n_sigma),
        _axis(*gamma_range, n_gamma),
        np.sort(np.asarray(jump_values, dtype=np.float64)),
    )


# ---------------------------------------------------------------------------
# Objectives. The batch forms score rows of a (n_candidates, n_points) array
# against one observed vector; the scalar forms delegate to them.


def _batch_mse(observed: np.ndarray, models: np.ndarray) -> np.ndarray:
    return np.mean((models - observed) ** 2, axis=1)


def _batch_mape(observed: np.ndarray, models: np.ndarray) -> np.ndarray:
    return np.mean(np.abs(models - observed) / observed, axis=1)


def _batch_kl(observed: np.ndarray, models: np.ndarray, n_bins: int) -> np.ndarray:
    obs_r = np.log(observed[1:] / observed[:-1])
    mod_r = np.log(models[:, 1:] / models[:, :-1])
    n_candidates, n = mod_r.shape
    lo = np.minimum(obs_r.min(), mod_r.min(axis=1))[:, None]
    hi = np.maximum(obs_r.max(), mod_r.max(axis=1))[:, None]
    width = hi - lo
    safe = np.where(width > 0, width, 1.0)

    def bin_index(x):
        idx = np.floor((x - lo) / safe * n_bins)
        idx = np.where(width > 0, idx, 0)
        return np.clip(idx, 0, n_bins - 1).astype(np.intp)

    offsets = (np.arange(n_candidates) * n_bins)[:, None]
    size = n_candidates * n_bins
    p_counts = np.bincount((bin_index(obs_r[None, :]) + offsets).ravel(), minlength=size)
    q_counts = np.bincount((bin_index(mod_r) + offsets).ravel(), minlength=size)
    p = (p_counts.reshape(n_candidates, n_bins) + 1.0) / (n + n_bins)
    q = (q_counts.reshape(n_candidates, n_bins) + 1.0) / (n + n_bins)
    return np.sum(p * np.log(p / q), axis=1)


def _score(observed: np.ndarray, models: np.ndarray, kind: ObjectiveKind, n_bins: int) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if kind is ObjectiveKind.MSE:
            scores = _batch_mse(observed, models)
        elif kind is ObjectiveKind.MAPE:
            scores = _batch_mape(observed, models)
        else:
            scores = _batch_kl(observed, models, n_bins)
    # exploded or otherwise undefined paths never win
    return np.where(np.isfinite(scores), scores, np.inf)


def _pair(observed, model, minimum: int) -> tuple[np.ndarray, np.ndarray]:
    obs = as_prices(observed)
    mod = as_prices(model)
    if obs.size != mod.size:
        raise InvalidInputError(f"length mismatch: {obs.size} observed vs {mod.size} model")
    if obs.size < minimum:
        raise InvalidInputError(f"objective needs at least {minimum} points")
    return obs, mod


def objective_mse(observed, model) -> float:
    obs, mod = _pair(observed, model, 1)
    return float(_batch_mse(obs, mod[None, :])[0])


def objective_mape(observed, model) -> float:
    obs, mod = _pair(observed, model, 1)
    if np.any(obs <= 0):
        raise InvalidInputError("MAPE requires positive observed prices")
    return float(_batch_mape(obs, mod[None, :])[0])


def objective_kl(observed, model, n_bins: int = DEFAULT_KL_BINS) -> float:
    """KL(P || Q) between smoothed log-return histograms.

    Both histograms share ``n_bins`` equal-width bins spanning the union of
    the two return samples; each count gets +1 before normalizing.
    """
    obs, mod = _pair(observed, model, 3)
    if n_bins < 2:
        raise InvalidInputError("n_bins must be at least 2")
    return float(_batch_kl(obs, mod[None, :], n_bins)[0])


def objective(kind: ObjectiveKind | str, observed, model, n_bins: int = DEFAULT_KL_BINS) -> float:
    kind = ObjectiveKind(kind)
    if kind is ObjectiveKind.MSE:
        return objective_mse(observed, model)
    if kind is ObjectiveKind.MAPE:
        return objective_mape(observed, model)
    return objective_kl(observed, model, n_bins)


# ---------------------------------------------------------------------------
# Search


@dataclass(frozen=True)
class FitResult:
    params: CevParams
    jump: JumpFactor | None
    objective_value: float
    objective_kind: ObjectiveKind
    grid_index: int
    n_candidates: int


def score_candidates(
    observed,
    mu,
    sigma,
    gamma,
    s0,
    noise: NoisePath,
    kind: ObjectiveKind | str = ObjectiveKind.MSE,
    n_bins: int = DEFAULT_KL_BINS,
) -> np.ndarray:
    """Objective of each candidate (broadcast over ``mu, sigma, gamma, s0``)."""
    obs = as_prices(observed)
    kind = ObjectiveKind(kind)
    draws = noise.take(obs.size - 1)
    paths = simulate_cev_batch(mu, sigma, gamma, s0, draws)
    return _score(obs, np.ascontiguousarray(paths.T), kind, n_bins)


def select_best(indices, scores) -> tuple[int, float]:
    """Smallest score; ties go to the smallest index. Order of inputs is irrelevant."""
    indices = np.asarray(indices)
    scores = np.asarray(scores, dtype=np.float64)
    if indices.size == 0:
        raise InvalidInputError("no candidates to select from")
    best = scores.min()
    winner = indices[scores == best].min()
    return int(winner), float(best)


def _search(observed, mu, sigma, gamma, s0, noise, kind, n_bins, chunk_size, workers):
    """Score all candidates in chunks, possibly on threads, and reduce."""
    total = mu.size
    chunks = [(lo, min(lo + chunk_size, total)) for lo in range(0, total, chunk_size)]
    scores = np.empty(total)

    def run(bounds):
        lo, hi = bounds
        return bounds, score_candidates(
            observed, mu[lo:hi], sigma[lo:hi], gamma[lo:hi], s0[lo:hi], noise, kind, n_bins
        )

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for fut in as_completed([pool.submit(run, c) for c in chunks]):
                (lo, hi), chunk_scores = fut.result()
                scores[lo:hi] = chunk_scores
    else:
        for c in chunks:
            (lo, hi), chunk_scores = run(c)
            scores[lo:hi] = chunk_scores
    return select_best(np.arange(total), scores)


def _check_search_inputs(obs: np.ndarray, noise: NoisePath, s0) -> None:
    if obs.size < 2:
        raise InvalidInputError("series must have at least 2 prices")
    if len(noise) < obs.size - 1:
        raise InvalidInputError(
            f"noise path has {len(noise)} draws, series needs {obs.size - 1}"
        )
    if not np.all(np.asarray(s0) > 0):
        raise InvalidInputError("s0 must be positive")


def grid_search_fit(
    series,
    grid: GridSpec,
    objective_kind: ObjectiveKind | str,
    noise: NoisePath,
    s0: float,
    *,
    n_bins: int = DEFAULT_KL_BINS,
    chunk_size: int = CHUNK_SIZE,
    workers: int = 1,
) -> FitResult:
    """Best (mu, sigma, gamma) lattice point for ``series`` started at ``s0``."""
    obs = as_prices(series)
    kind = ObjectiveKind(objective_kind)
    _check_search_inputs(obs, noise, s0)
    mu, sigma, gamma = grid.flat_axes()
    s0_vec = np.full(mu.size, float(s0))
    index, value = _search(obs, mu, sigma, gamma, s0_vec, noise, kind, n_bins, chunk_size, workers)
    return FitResult(grid.candidate(index), None, value, kind, index, grid.n_candidates)


def grid_search_jump_fit(
    series,
    grid: GridSpec,
    objective_kind: ObjectiveKind | str,
    noise: NoisePath,
    anchor_price: float,
    *,
    n_bins: int = DEFAULT_KL_BINS,
    chunk_size: int = CHUNK_SIZE,
    workers: int = 1,
) -> FitResult:
    """Search jump x lattice with ``s0 = anchor_price * y``.

    The grid index is jump-major: ``jump_index * n_lattice + lattice_index``,
    so ties favor earlier jump values.
    """
    obs = as_prices(series)
    kind = ObjectiveKind(objective_kind)
    _check_search_inputs(obs, noise, anchor_price)
    mu, sigma, gamma = grid.flat_axes()
    n_jump = grid.jump_values.size
    starts = np.array([apply_jump_initial(anchor_price, JumpFactor(float(y))) for y in grid.jump_values])
    index, value = _search(
        obs,
        np.tile(mu, n_jump),
        np.tile(sigma, n_jump),
        np.tile(gamma, n_jump),
        np.repeat(starts, mu.size),
        noise,
        kind,
        n_bins,
        chunk_size,
        workers,
    )
    jump_index, lattice_index = divmod(index, grid.n_candidates)
    return FitResult(
        grid.candidate(lattice_index),
        JumpFactor(float(grid.jump_values[jump_index])),
        value,
        kind,
        index,
        grid.n_candidates * n_jump,
    )


def fit_jump_cev(
    window: EventWindow,
    grid: GridSpec,
    objective_kind: ObjectiveKind | str,
    noise_left: NoisePath,
    noise_right: NoisePath,
    *,
    right_grid: GridSpec | None = None,
    **search_kwargs,
) -> tuple[FitResult, FitResult]:
    """Fit CEV before the break and jump-CEV after it.

    The left model starts at the first left price. The right model starts at
    the last left price scaled by each candidate jump. ``right_grid`` defaults
    to ``grid``.
    """
    left = grid_search_fit(
        window.left, grid, objective_kind, noise_left, float(window.left.prices[0]), **search_kwargs
    )
    right = grid_search_jump_fit(
        window.right,
        right_grid if right_grid is not None else grid,
        objective_kind,
        noise_right,
        float(window.left.prices[-1]),
        **search_kwargs,
    )
    return left, right
