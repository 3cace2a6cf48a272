"""Smoothed gradient-based exponential sampler on a discretized domain
(d <= 2): score each grid point by the windowed infimum of the mean-gradient
norm, exponentiate, normalize, and sample by inverse CDF.  The discrete
realization keeps the per-point score sensitivity of the continuous design;
the grid spacing is tied to the smoothing radius."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import minimum_filter, minimum_filter1d
from scipy.special import logsumexp

from .core import (
    Dataset,
    Domain,
    GrowthSpec,
    InvalidInputError,
    LossOracle,
    ResourceError,
    RngStream,
)

__all__ = [
    "GridDensity",
    "default_rho",
    "smoothed_grad_norm",
    "build_density",
    "sample",
    "excess_risk_bound",
]

MAX_GRID_POINTS = 10_000_000


@dataclass(frozen=True)
class GridDensity:
    """Normalized sampling density over a lattice covering the domain."""

    points: np.ndarray  # (G, d)
    log_weights: np.ndarray  # raw scores: -eps * n * G_rho / (2 L)
    log_probs: np.ndarray  # normalized
    spacing: float
    rho: float

    def __post_init__(self):
        probs = np.exp(self.log_probs)
        total = float(probs.sum())
        if abs(total - 1.0) > 1e-12:
            raise InvalidInputError(f"density normalization off by {total - 1.0:g}")
        if not (self.spacing <= self.rho / 4.0 + 1e-15):
            raise InvalidInputError("grid spacing must satisfy h <= rho / 4")

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_probs)


def default_rho(
    L: float, lam: float, kappa_lower: float, n: int, d: int, epsilon: float
) -> float:
    """Smoothing radius (L/lam)^(1/(k-1)) * (d/(n eps))^(k/(k-1)) for k = kappa_lower."""
    if not (kappa_lower > 1):
        raise InvalidInputError("kappa_lower must exceed 1")
    inv = 1.0 / (kappa_lower - 1.0)
    return (L / lam) ** inv * (d / (n * epsilon)) ** (kappa_lower * inv)


def _grid_1d(domain: Domain, h: float) -> np.ndarray:
    lo, hi = domain.interval()
    count = int(math.floor((hi - lo) / h)) + 1
    if count > MAX_GRID_POINTS:
        raise ResourceError(
            f"grid of {count} points exceeds the cap; use a coarser spacing"
        )
    return (lo + h * np.arange(count))[:, None]


def _mean_grad_norms(loss: LossOracle, data: Dataset, points: np.ndarray) -> np.ndarray:
    grads = loss.mean_grads(points, data.samples)
    return np.linalg.norm(grads, axis=1)


def _refined_norms_1d(loss: LossOracle, data: Dataset, points: np.ndarray) -> np.ndarray:
    """Gradient-norm lower envelope on an ordered 1-D grid.

    The batch objective is convex, so a sign change of its mean gradient
    between adjacent grid points brackets a stationary point where the
    min-norm subgradient vanishes; both endpoints of such a segment are
    scored zero.  This keeps atoms of absolute losses visible even when the
    empirical minimizer falls between lattice points (error <= one spacing,
    inside the smoothing-radius slack).
    """
    g = loss.mean_grads(points, data.samples)[:, 0]
    norms = np.abs(g)
    crossing = g[:-1] * g[1:] <= 0.0
    norms[:-1] = np.where(crossing, 0.0, norms[:-1])
    norms[1:] = np.where(crossing, 0.0, norms[1:])
    return norms


def smoothed_grad_norm(
    loss: LossOracle,
    data: Dataset,
    x: np.ndarray,
    rho: float,
    domain: Domain,
    h: float | None = None,
) -> float:
    """Windowed infimum of the mean-gradient norm around ``x``.

    The infimum runs over lattice points of spacing ``h`` (default rho/8)
    within distance rho of x that lie in the domain, so the result carries a
    discretization error of order h times the local gradient variation.
    """
    if not (rho > 0):
        raise InvalidInputError("rho must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if h is None:
        h = rho / 8.0
    d = domain.dim
    offsets = np.arange(-math.floor(rho / h), math.floor(rho / h) + 1) * h
    if d == 1:
        pts = x[None, :] + offsets[:, None]
        lo, hi = domain.interval()
        pts = pts[(pts[:, 0] >= lo - 1e-12) & (pts[:, 0] <= hi + 1e-12)]
        if len(pts) == 0:
            pts = x[None, :]
        return float(_refined_norms_1d(loss, data, pts).min())
    elif d == 2:
        ox, oy = np.meshgrid(offsets, offsets, indexing="ij")
        pts = x[None, :] + np.column_stack([ox.ravel(), oy.ravel()])
        pts = pts[np.linalg.norm(pts - x[None, :], axis=1) <= rho + 1e-12]
    else:
        raise InvalidInputError("smoothed scores are realized only for d <= 2")
    keep = np.array([domain.contains(p, tol=1e-12) for p in pts])
    pts = pts[keep]
    if len(pts) == 0:
        pts = x[None, :]
    return float(_mean_grad_norms(loss, data, pts).min())


def build_density(
    loss: LossOracle,
    data: Dataset,
    domain: Domain,
    epsilon: float,
    rho: float | None = None,
    h: float | None = None,
    growth: GrowthSpec | None = None,
) -> GridDensity:
    """Score every grid point and normalize.

    ``rho`` defaults to the growth-adapted smoothing radius when a growth
    certificate is supplied.  ``h`` defaults to rho/4 and must not exceed it.
    """
    if not (epsilon > 0):
        raise InvalidInputError("epsilon must be positive")
    if rho is None:
        if growth is None:
            raise InvalidInputError("supply rho or a growth certificate")
        rho = default_rho(
            loss.lipschitz, growth.lam, growth.kappa_lower, data.n, domain.dim, epsilon
        )
    if not (rho > 0):
        raise InvalidInputError("rho must be positive")
    if h is None:
        h = rho / 4.0
    if h > rho / 4.0 + 1e-15:
        raise InvalidInputError("grid spacing must satisfy h <= rho / 4")
    d = domain.dim
    window = int(math.floor(rho / h + 1e-9))
    if d == 1:
        points = _grid_1d(domain, h)
        norms = _refined_norms_1d(loss, data, points)
        smoothed = minimum_filter1d(norms, size=2 * window + 1, mode="nearest")
    elif d == 2:
        lo_x = domain.center[0] - domain.radius
        lo_y = domain.center[1] - domain.radius
        count = int(math.floor(2.0 * domain.radius / h)) + 1
        if count * count > MAX_GRID_POINTS:
            raise ResourceError(
                f"grid of {count * count} points exceeds the cap; use a coarser spacing"
            )
        gx = lo_x + h * np.arange(count)
        gy = lo_y + h * np.arange(count)
        mx, my = np.meshgrid(gx, gy, indexing="ij")
        lattice = np.column_stack([mx.ravel(), my.ravel()])
        feasible = np.array([domain.contains(p, tol=1e-12) for p in lattice])
        norms = np.full(lattice.shape[0], np.inf)
        norms[feasible] = _mean_grad_norms(loss, data, lattice[feasible])
        grid_norms = norms.reshape(count, count)
        ii, jj = np.meshgrid(
            np.arange(-window, window + 1), np.arange(-window, window + 1), indexing="ij"
        )
        footprint = (ii * ii + jj * jj) * h * h <= rho * rho + 1e-12
        smoothed_grid = minimum_filter(grid_norms, footprint=footprint, mode="nearest")
        points = lattice[feasible]
        smoothed = smoothed_grid.ravel()[feasible]
    else:
        raise InvalidInputError("the grid sampler is realized only for d <= 2")
    log_weights = -epsilon * data.n * smoothed / (2.0 * loss.lipschitz)
    log_probs = log_weights - logsumexp(log_weights)
    # Renormalize away the last float ulps so probabilities sum to one exactly
    # enough for inverse-CDF sampling.
    log_probs = log_probs - math.log(float(np.exp(log_probs).sum()))
    return GridDensity(
        points=points,
        log_weights=log_weights,
        log_probs=log_probs,
        spacing=h,
        rho=rho,
    )


def sample(density: GridDensity, rng: RngStream, size: int | None = None) -> np.ndarray:
    """Inverse-CDF draws from the grid density.

    Returns a single point of shape (d,) when ``size`` is None, else (size, d).
    """
    cdf = np.cumsum(density.probabilities)
    cdf[-1] = 1.0
    u = rng.gen.random(1 if size is None else size)
    idx = np.searchsorted(cdf, u, side="right")
    idx = np.minimum(idx, len(cdf) - 1)
    picked = density.points[idx]
    return picked[0] if size is None else picked


def excess_risk_bound(
    L: float,
    n: int,
    epsilon: float,
    beta: float,
    d: int,
    R: float,
    rho: float,
    growth: GrowthSpec,
) -> float:
    """High-probability empirical excess-risk bound for the sampler:

        (1/lam^(1/(k-1))) * (2 L K / (n eps))^(k/(k-1)) + L rho,
        K = log(1/beta) + d log(1 + R/rho),

    with k the certified growth exponent.
    """
    if not (0 < beta < 1):
        raise InvalidInputError("beta must lie in (0, 1)")
    if not (rho > 0 and R > 0 and L > 0 and n >= 1 and epsilon > 0):
        raise InvalidInputError("L, n, epsilon, R, rho must be positive")
    if not (growth.kappa > 1):
        raise InvalidInputError("the bound needs kappa > 1")
    kappa = growth.kappa
    K = math.log(1.0 / beta) + d * math.log1p(R / rho)
    main = (2.0 * L * K / (n * epsilon)) ** (kappa / (kappa - 1.0))
    return main / growth.lam ** (1.0 / (kappa - 1.0)) + L * rho
