"""Noise primitives and calibration: Laplace and Gaussian scales, iid noise
sampling, sequential composition, and an empirical neighboring-dataset
distinguishability test (a falsifier, not a certifier)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Dataset, InvalidInputError, PrivacyParams, RngStream, hamming_distance

__all__ = [
    "NoiseSpec",
    "laplace_sigma",
    "gaussian_sigma",
    "sample_noise",
    "compose",
    "DpTestReport",
    "empirical_dp_test",
]

LAPLACE_IID = "laplace_iid"
GAUSSIAN_ISO = "gaussian_iso"


@dataclass(frozen=True)
class NoiseSpec:
    """A d-dimensional noise distribution: iid Laplace(sigma) per coordinate,
    or isotropic mean-zero Gaussian with per-coordinate variance sigma^2."""

    kind: str
    sigma: float
    dim: int

    def __post_init__(self):
        if self.kind not in (LAPLACE_IID, GAUSSIAN_ISO):
            raise InvalidInputError(f"unknown noise kind {self.kind!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidInputError("sigma must be finite and positive")
        if self.dim < 1:
            raise InvalidInputError("dim must be >= 1")


def laplace_sigma(l1_sensitivity: float, epsilon: float) -> float:
    """Laplace scale for a statistic with the given l1 sensitivity: sigma = Delta / epsilon."""
    if not (l1_sensitivity > 0):
        raise InvalidInputError("l1 sensitivity must be positive")
    if not (epsilon > 0):
        raise InvalidInputError("epsilon must be positive")
    return l1_sensitivity / epsilon

def gaussian_sigma(l2_sensitivity: float, epsilon: float, delta: float) -> float:
    """Gaussian standard deviation for the given l2 sensitivity:
    sigma = 2 * Delta * log(2/delta) / epsilon (natural log)."""
    if not (l2_sensitivity > 0):
        raise InvalidInputError("l2 sensitivity must be positive")
    if not (epsilon > 0):
        raise InvalidInputError("epsilon must be positive")
    if not (0.0 < delta < 1.0):
        raise InvalidInputError(f"delta must lie in (0, 1), got {delta}")
    return 2.0 * l2_sensitivity * math.log(2.0 / delta) / epsilon


def sample_noise(spec: NoiseSpec, rng: RngStream) -> np.ndarray:
    """Draw one noise vector of shape (dim,)."""
    if spec.kind == LAPLACE_IID:
        return rng.gen.laplace(0.0, spec.sigma, size=spec.dim)
    return rng.gen.normal(0.0, spec.sigma, size=spec.dim)


def compose(budgets: list[PrivacyParams]) -> PrivacyParams:
    """Sequential composition: budgets add up coordinate-wise."""
    if not budgets:
        raise InvalidInputError("cannot compose an empty budget list")
    return PrivacyParams(
        epsilon=sum(b.epsilon for b in budgets),
        delta=sum(b.delta for b in budgets),
    )


@dataclass(frozen=True)
class DpTestReport:
    """Outcome of the histogram-ratio distinguishability test.

    ``passed`` means no violation was detected; it never certifies privacy.
    ``inconclusive`` flags runs where too few bins collected enough mass for
    the ratio statistic to mean anything.
    """

    max_log_ratio: float
    epsilon: float
    slack: float
    passed: bool
    inconclusive: bool
    n_qualifying_bins: int
    min_bin_count: int


def empirical_dp_test(
    mechanism: Callable[[Dataset, RngStream, int], np.ndarray],
    data: Dataset,
    data_neighbor: Dataset,
    epsilon: float,
    trials: int,
    bins: int,
    rng: RngStream,
    min_count: int = 50,
    bin_range: tuple[float, float] | None = None,
) -> DpTestReport:
    """Run ``mechanism`` on two neighboring datasets and compare output histograms.

    ``mechanism(dataset, rng, trials)`` must return ``trials`` scalar outputs.
    Outputs are clamped into a shared binning range, and the statistic is the
    largest absolute log-ratio of bin frequencies over bins holding at least
    ``min_count`` samples under both datasets.  The pass threshold is
    ``epsilon + slack`` with slack = 3 / sqrt(min qualifying bin count), a
    Monte Carlo allowance.  The test can expose a violation; it cannot prove
    privacy.
    """
    if epsilon <= 0 or trials < 1 or bins < 2:
        raise InvalidInputError("need epsilon > 0, trials >= 1, bins >= 2")
    if hamming_distance(data, data_neighbor) != 1:
        raise InvalidInputError("datasets must differ in exactly one sample")
    out_a = np.asarray(mechanism(data, rng.child(0), trials), dtype=float).ravel()
    out_b = np.asarray(mechanism(data_neighbor, rng.child(1), trials), dtype=float).ravel()
    if out_a.shape != (trials,) or out_b.shape != (trials,):
        raise InvalidInputError("mechanism must return `trials` scalar outputs")
    if bin_range is None:
        lo = float(min(out_a.min(), out_b.min()))
        hi = float(max(out_a.max(), out_b.max()))
        if hi <= lo:
            hi = lo + 1e-12
    else:
        lo, hi = bin_range
    edges = np.linspace(lo, hi, bins + 1)
    count_a, _ = np.histogram(np.clip(out_a, lo, hi), bins=edges)
    count_b, _ = np.histogram(np.clip(out_b, lo, hi), bins=edges)
    qualifying = (count_a >= min_count) & (count_b >= min_count)
    n_qual = int(qualifying.sum())
    if n_qual == 0:
        return DpTestReport(
            max_log_ratio=math.nan,
            epsilon=epsilon,
            slack=math.inf,
            passed=True,
            inconclusive=True,
            n_qualifying_bins=0,
            min_bin_count=0,
        )
    pa = count_a[qualifying] / trials
    pb = count_b[qualifying] / trials
    max_log_ratio = float(np.max(np.abs(np.log(pa) - np.log(pb))))
    min_bin = int(min(count_a[qualifying].min(), count_b[qualifying].min()))
    slack = 3.0 / math.sqrt(min_bin)
    return DpTestReport(
        max_log_ratio=max_log_ratio,
        epsilon=epsilon,
        slack=slack,
        passed=max_log_ratio <= epsilon + slack,
        inconclusive=False,
        n_qualifying_bins=n_qual,
        min_bin_count=min_bin,
    )
