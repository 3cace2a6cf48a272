"""Epoch-based outer loop for growth adaptation: halve the trust radius and
base step size every epoch and delegate each epoch to the localization chain
on a fresh disjoint data block.  Only a lower estimate of the growth exponent
enters, through the epoch count."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import localization
from .core import (
    Dataset,
    Domain,
    InvalidInputError,
    LossOracle,
    PrivacyParams,
    RngStream,
)

__all__ = ["EpochConfig", "EpochRecord", "default_eta0", "epoch_count", "run"]

# Epochs whose radius has decayed below this fraction of the initial radius
# cannot move the iterate at double precision; they are recorded as frozen.
_FROZEN_RADIUS_FRACTION = 1e-15


def epoch_count(n: int, kappa_lower: float) -> int:
    """T = ceil(2 log2(n) / (kappa_lower - 1))."""
    if not (kappa_lower > 1):
        raise InvalidInputError("kappa_lower must exceed 1")
    if n < 2:
        raise InvalidInputError("need n >= 2")
    return max(1, math.ceil(2.0 * math.log2(n) / (kappa_lower - 1.0)))


def default_eta0(
    R0: float, L: float, n0: int, beta: float, privacy: PrivacyParams, d: int
) -> float:
    """Initial epoch step size.

    Pure mode:   (R0 / 2L) * min(1/sqrt(n0 log(n0) log(1/beta)), eps/(d log(1/beta)))
    Approx mode: same with eps / (sqrt(d log(1/delta)) log(1/beta)).
    """
    if n0 < 2:
        raise InvalidInputError(f"per-epoch batch too small (n0={n0}); reduce the epoch count")
    if not (R0 > 0 and L > 0 and d >= 1):
        raise InvalidInputError("R0, L, d must be positive")
    if not (0.0 < beta < 1.0):
        raise InvalidInputError("beta must lie in (0, 1)")
    log_b = math.log(1.0 / beta)
    stat = 1.0 / math.sqrt(n0 * math.log(n0) * log_b)
    if privacy.is_pure:
        priv = privacy.epsilon / (d * log_b)
    else:
        if privacy.delta > localization.MAX_APPROX_DELTA:
            raise InvalidInputError(
                f"approximate mode needs delta <= {localization.MAX_APPROX_DELTA}"
            )
        priv = privacy.epsilon / (
            math.sqrt(d * math.log(1.0 / privacy.delta)) * log_b
        )
    return (R0 / (2.0 * L)) * min(stat, priv)


@dataclass(frozen=True)
class EpochConfig:
    """Outer-loop parameters.

    ``T`` epochs consume disjoint blocks of size floor(n/T); epoch i uses
    radius R0 * 2^-i and step eta0 * 2^-i.  The inner chain receives the
    squared confidence parameter, matching the union bound over epochs.
    """

    kappa_lower: float
    beta: float
    privacy: PrivacyParams
    T: int
    R0: float
    eta0: float
    noise_scale: float = 1.0
    gaussian_conservative: bool = False

    def __post_init__(self):
        if not (self.kappa_lower > 1):
            raise InvalidInputError("kappa_lower must exceed 1")
        if not (0.0 < self.beta < 1.0):
            raise InvalidInputError("beta must lie in (0, 1)")
        if self.T < 1:
            raise InvalidInputError("T must be >= 1")
        if not (self.R0 > 0 and self.eta0 > 0):
            raise InvalidInputError("R0 and eta0 must be positive")

    @classmethod
    def for_run(
        cls,
        n: int,
        loss: LossOracle,
        domain: Domain,
        kappa_lower: float,
        beta: float,
        privacy: PrivacyParams,
        **kwargs,
    ) -> "EpochConfig":
        """Build the config with the schedule implied by (n, kappa_lower)."""
        T = epoch_count(n, kappa_lower)
        n0 = n // T
        R0 = domain.diameter()
        eta0 = default_eta0(R0, loss.lipschitz, n0, beta, privacy, loss.point_dim)
        return cls(
            kappa_lower=kappa_lower,
            beta=beta,
            privacy=privacy,
            T=T,
            R0=R0,
            eta0=eta0,
            **kwargs,
        )


@dataclass(frozen=True)
class EpochRecord:
    """Per-epoch trace: trust region (center, radius) and the resulting iterate."""

    index: int
    center: np.ndarray
    radius: float
    eta: float
    x_next: np.ndarray
    frozen: bool = False


def run(
    loss: LossOracle,
    data: Dataset,
    domain: Domain,
    x0: np.ndarray,
    cfg: EpochConfig,
    rng: RngStream,
    trace: Optional[list] = None,
) -> np.ndarray:
    """Run T epochs and return the final iterate.

    Epoch i restricts to {x in domain : ||x - x_i|| <= R_i}, runs the
    localization chain on block i with step eta_i, and adopts its output.
    Disjoint blocks keep the total budget at the per-epoch (epsilon, delta).
    """
    n0 = data.n // cfg.T
    if n0 < 2:
        raise InvalidInputError(
            f"insufficient data: n={data.n} gives per-epoch batches of {n0} < 2"
        )
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    if not domain.contains(x, tol=1e-9):
        raise InvalidInputError("x0 must lie in the domain")
    inner_k = localization.LocalizationConfig.phase_count(n0)
    if n0 < inner_k:
        raise InvalidInputError("per-epoch batch smaller than its phase count")
    for i in range(cfg.T):
        radius = cfg.R0 * 2.0 ** (-i)
        eta_i = cfg.eta0 * 2.0 ** (-i)
        if radius < _FROZEN_RADIUS_FRACTION * cfg.R0:
            # Movement per epoch is bounded by the trust radius plus noise of
            # the same decay; at this scale the iterate is numerically fixed.
            if trace is not None:
                trace.append(EpochRecord(i, x.copy(), radius, eta_i, x.copy(), frozen=True))
            continue
        region = Domain(x, radius, parent=domain)
        inner_cfg = localization.LocalizationConfig(
            eta=eta_i,
            beta=cfg.beta**2,
            privacy=cfg.privacy,
            k=inner_k,
            n0=n0 // inner_k,
            noise_scale=cfg.noise_scale,
            gaussian_conservative=cfg.gaussian_conservative,
        )
        x_next = localization.run(
            loss, data.block(i, n0), region, x, inner_cfg, rng
        )
        if trace is not None:
            trace.append(EpochRecord(i, x.copy(), radius, eta_i, x_next.copy()))
        x = x_next
    return x


def index_in_region(trace: list, xstar: np.ndarray) -> int:
    """Largest epoch index whose trust region contains ``xstar`` (-1 if none)."""
    xstar = np.atleast_1d(np.asarray(xstar, dtype=float))
    best = -1
    for rec in trace:
        if float(np.linalg.norm(xstar - rec.center)) <= rec.radius:
            best = rec.index
    return best


def region_membership_is_prefix(trace: list, xstar: np.ndarray) -> bool:
    """Whether {i : xstar in region_i} is a contiguous prefix of the epochs."""
    xstar = np.atleast_1d(np.asarray(xstar, dtype=float))
    flags = [
        float(np.linalg.norm(xstar - rec.center)) <= rec.radius for rec in trace
    ]
    if not any(flags):
        return False
    last_true = max(i for i, f in enumerate(flags) if f)
    return all(flags[: last_true + 1])
