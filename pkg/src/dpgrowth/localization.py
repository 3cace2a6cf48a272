"""Localization-based private SCO: solve a chain of anchored regularized ERM
problems over geometrically shrinking trust regions, adding calibrated noise
to each solution.  Disjoint per-phase batches make the whole run private at
the per-phase budget."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import erm
from .core import (
    Dataset,
    Domain,
    InvalidInputError,
    IsotropicQuadratic,
    LossOracle,
    PrivacyParams,
    RngStream,
)

__all__ = [
    "LocalizationConfig",
    "PhaseRecord",
    "default_eta_pure",
    "default_eta_approx",
    "run",
]

# Approximate-DP budgets with delta this large make the noise line degenerate
# (log(1/delta) -> 0); they are rejected rather than silently accepted.
MAX_APPROX_DELTA = 0.5

# Absolute floor keeping solver tolerances meaningful in double precision.
_TOL_FLOOR_FACTOR = 1e-13


def default_eta_pure(R: float, L: float, n: int, beta: float, epsilon: float, d: int) -> float:
    """Base step size for the pure-DP mode:
    (R/L) * min(1/sqrt(n log(1/beta)), epsilon/(d log(1/beta)))."""
    _check_eta_args(R, L, n, beta, d)
    if not (epsilon > 0):
        raise InvalidInputError("epsilon must be positive")
    log_b = math.log(1.0 / beta)
    return (R / L) * min(1.0 / math.sqrt(n * log_b), epsilon / (d * log_b))


def default_eta_approx(
    R: float, L: float, n: int, beta: float, epsilon: float, delta: float, d: int
) -> float:
    """Base step size for the approximate-DP mode:
    (R/L) * min(1/sqrt(n log(1/beta)), epsilon/(sqrt(d log(1/delta)) log(1/beta)))."""
    _check_eta_args(R, L, n, beta, d)
    if not (epsilon > 0):
        raise InvalidInputError("epsilon must be positive")
    if not (0.0 < delta <= MAX_APPROX_DELTA):
        raise InvalidInputError(
            f"approximate mode needs 0 < delta <= {MAX_APPROX_DELTA}, got {delta}"
        )
    log_b = math.log(1.0 / beta)
    log_d = math.log(1.0 / delta)
    return (R / L) * min(
        1.0 / math.sqrt(n * log_b), epsilon / (math.sqrt(d * log_d) * log_b)
    )


def _check_eta_args(R, L, n, beta, d):
    if not (R > 0 and L > 0 and n >= 1 and d >= 1):
        raise InvalidInputError("R, L, n, d must be positive")
    # The high-probability analysis needs a small confidence parameter; 1/n is
    # the binding condition of the stability bound behind it.
    if not (0.0 < beta <= 1.0 / n):
        raise InvalidInputError(f"beta must lie in (0, 1/n], got {beta}")


@dataclass(frozen=True)
class LocalizationConfig:
    """Run parameters: base step eta, confidence beta, privacy budget, the
    phase count k = ceil(log2 n) and per-phase batch size n0 = floor(n/k).

    ``noise_scale`` rescales every injected noise draw; it exists for the
    privacy falsifier (sabotage) and for noiseless oracle runs, and must be
    1.0 for any run whose privacy claim matters.  ``gaussian_conservative``
    switches the approximate-DP noise to the conservative calibration
    2 * (4 L eta_i) * log(2/delta) / epsilon.
    """

    eta: float
    beta: float
    privacy: PrivacyParams
    k: int
    n0: int
    noise_scale: float = 1.0
    gaussian_conservative: bool = False
    max_solver_iters: int = 200_000

    def __post_init__(self):
        if not (self.eta > 0):
            raise InvalidInputError("eta must be positive")
        if not (0.0 < self.beta < 1.0):
            raise InvalidInputError("beta must lie in (0, 1)")
        if self.k < 1 or self.n0 < 1:
            raise InvalidInputError("k and n0 must be >= 1")
        if self.noise_scale < 0:
            raise InvalidInputError("noise_scale must be >= 0")
        if not self.privacy.is_pure and self.privacy.delta > MAX_APPROX_DELTA:
            raise InvalidInputError(
                f"approximate mode needs delta <= {MAX_APPROX_DELTA}"
            )

    @staticmethod
    def phase_count(n: int) -> int:
        return max(1, math.ceil(math.log2(n)))

    @classmethod
    def for_data_size(
        cls,
        n: int,
        eta: float,
        beta: float,
        privacy: PrivacyParams,
        **kwargs,
    ) -> "LocalizationConfig":
        k = cls.phase_count(n)
        return cls(eta=eta, beta=beta, privacy=privacy, k=k, n0=n // k, **kwargs)


@dataclass(frozen=True)
class PhaseRecord:
    """Per-phase trace entry (solver output before and after noising)."""

    index: int
    eta_i: float
    radius: float
    sigma: float
    x_solved: np.ndarray
    x_noised: np.ndarray


def phase_sigma(cfg: LocalizationConfig, L: float, eta_i: float, d: int) -> float:
    """Noise scale for one phase, before the diagnostic ``noise_scale``."""
    if cfg.privacy.is_pure:
        return 4.0 * L * eta_i * math.sqrt(d) / cfg.privacy.epsilon
    if cfg.gaussian_conservative:
        return 2.0 * (4.0 * L * eta_i) * math.log(2.0 / cfg.privacy.delta) / cfg.privacy.epsilon
    return (
        4.0 * L * eta_i * math.sqrt(math.log(1.0 / cfg.privacy.delta)) / cfg.privacy.epsilon
    )


def run(
    loss: LossOracle,
    data: Dataset,
    domain: Domain,
    x0: np.ndarray,
    cfg: LocalizationConfig,
    rng: RngStream,
    trace: Optional[list] = None,
) -> np.ndarray:
    """Run the localization chain and return the final (noised, projected) iterate.

    Phase i solves the batch ERM anchored at the previous iterate over the
    trust region {x in domain : ||x - x_{i-1}|| <= 2 L eta_i n0} with
    eta_i = 2^{-4i} eta, then adds iid Laplace (pure mode) or isotropic
    Gaussian (approximate mode) noise and projects back onto ``domain``.
    Each sample is consumed by exactly one phase; leftover samples beyond
    k * n0 are discarded.
    """
    k, n0 = cfg.k, cfg.n0
    if data.n < k:
        raise InvalidInputError(f"need at least k={k} samples, got {data.n}")
    if k * n0 > data.n:
        raise InvalidInputError(f"k * n0 = {k * n0} exceeds n = {data.n}")
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    if not domain.contains(x, tol=1e-9):
        raise InvalidInputError("x0 must lie in the domain")
    L = loss.lipschitz
    d = loss.point_dim
    if d == 1 and isinstance(loss.structure, IsotropicQuadratic):
        return _run_scalar_quadratic(loss, data, domain, x, cfg, rng, trace)
    tol_floor = _TOL_FLOOR_FACTOR * L * max(1.0, domain.diameter())
    for i in range(1, k + 1):
        eta_i = cfg.eta * 2.0 ** (-4 * i)
        radius = 2.0 * L * eta_i * n0
        region = Domain(x, radius, parent=domain)
        problem = erm.RegularizedProblem(
            loss=loss,
            batch=data.block(i - 1, n0),
            anchor=x,
            reg_weight=1.0 / (eta_i * n0),
            domain=region,
        )
        sigma = phase_sigma(cfg, L, eta_i, d)
        # Solve two orders below both the sensitivity scale and the honest
        # noise floor, so solver inexactness is negligible for privacy.
        tol = max(min(4.0 * L * eta_i, sigma) / 100.0, tol_floor)
        x_hat = erm.solve(problem, tol=tol, max_iters=cfg.max_solver_iters, rng=rng)
        sigma_used = sigma * cfg.noise_scale
        if sigma_used > 0:
            if cfg.privacy.is_pure:
                noise = rng.gen.laplace(0.0, sigma_used, size=d)
            else:
                noise = rng.gen.normal(0.0, sigma_used, size=d)
        else:
            noise = np.zeros(d)
        x = domain.project(x_hat + noise)
        if trace is not None:
            trace.append(PhaseRecord(i, eta_i, radius, sigma_used, x_hat, x))
    return x


def _run_scalar_quadratic(loss, data, domain, x0, cfg, rng, trace):
    """Exact scalar chain for 1-D isotropic-quadratic losses.

    In one dimension every trust region is an interval and the constrained
    minimizer of the quadratic phase objective is the clamped stationary
    point, so each phase is closed-form float arithmetic.  Output agrees with
    the generic path up to floating-point noise; this is the hot loop of the
    end-to-end privacy falsifier.
    """
    k, n0 = cfg.k, cfg.n0
    st = loss.structure
    curv = st.curvature
    L = loss.lipschitz
    lo_dom, hi_dom = domain.interval()
    # Per-phase means of the linear term, one vectorized pass.
    lin = st.linear(data.samples[: k * n0])
    qbar = lin.reshape(k, n0, -1).mean(axis=1)[:, 0]
    x = float(x0[0])
    pure = cfg.privacy.is_pure
    gen = rng.gen
    for i in range(1, k + 1):
        eta_i = cfg.eta * 2.0 ** (-4 * i)
        radius = 2.0 * L * eta_i * n0
        lam = 1.0 / (eta_i * n0)
        lo = max(lo_dom, x - radius)
        hi = min(hi_dom, x + radius)
        x_hat = (2.0 * lam * x - qbar[i - 1]) / (curv + 2.0 * lam)
        if x_hat < lo:
            x_hat = lo
        elif x_hat > hi:
            x_hat = hi
        sigma = phase_sigma(cfg, L, eta_i, 1)
        sigma_used = sigma * cfg.noise_scale
        if sigma_used > 0:
            if pure:
                noise = float(gen.laplace(0.0, sigma_used))
            else:
                noise = float(gen.normal(0.0, sigma_used))
        else:
            noise = 0.0
        x = x_hat + noise
        if x < lo_dom:
            x = lo_dom
        elif x > hi_dom:
            x = hi_dom
        if trace is not None:
            trace.append(
                PhaseRecord(i, eta_i, radius, sigma_used, np.array([x_hat]), np.array([x]))
            )
    return np.array([x])
