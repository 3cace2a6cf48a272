"""Shared domain types: loss oracles, ball domains with projections, privacy
budgets, growth certificates, datasets, seeded randomness, and probe-based
verification of growth and gradient-domination inequalities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

__all__ = [
    "InvalidInputError",
    "ConvergenceError",
    "ResourceError",
    "RngStream",
    "derive_stream_key",
    "Dataset",
    "Domain",
    "PrivacyParams",
    "GrowthSpec",
    "LossOracle",
    "CallableLoss",
    "IsotropicQuadratic",
    "PowerNorm",
    "SeparableAbsolute",
    "project",
    "ProbeReport",
    "verify_growth",
    "verify_kl",
]


class InvalidInputError(ValueError):
    """Raised when an operation receives arguments outside its contract."""


class ConvergenceError(RuntimeError):
    """Solver exhausted its iteration budget before certifying accuracy.

    Carries the best iterate seen and the stationarity residual at it.
    """

    def __init__(self, message: str, best_x: np.ndarray, residual: float):
        super().__init__(message)
        self.best_x = best_x
        self.residual = residual


class ResourceError(RuntimeError):
    """Raised when a request would exceed a hard resource cap."""


# ---------------------------------------------------------------------------
# Seeded randomness
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_stream_key(seed: int, stream: int) -> int:
    """Random-access output of a splitmix-style sequence keyed at ``seed``.

    The state advances by the 64-bit golden-ratio increment per step, so the
    ``stream``-th output is ``mix64(seed + (stream + 1) * GAMMA)``.  This is
    the documented master-seed -> trial-stream derivation used everywhere in
    the harness; it is pure integer arithmetic and machine independent.
    """
    state = (seed + (stream + 1) * _GAMMA) & _MASK64
    return _mix64(state)


class RngStream:
    """One independently seeded random stream, owned by a single consumer.

    Identical ``(seed, stream)`` pairs produce bit-identical draw sequences;
    distinct stream ids give statistically independent streams.  ``gen`` is a
    numpy ``Generator`` (PCG64) seeded with :func:`derive_stream_key`.
    """

    __slots__ = ("seed", "stream", "gen")

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        self.gen = np.random.Generator(
            np.random.PCG64(derive_stream_key(self.seed, self.stream))
        )

    def child(self, substream: int) -> "RngStream":
        """Derive an independent stream; the parent's key becomes the child seed."""
        return RngStream(derive_stream_key(self.seed, self.stream), substream)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """An ordered sample matrix of shape (n, sample_dim)."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise InvalidInputError("dataset must be a nonempty (n, sample_dim) array")
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def sample_dim(self) -> int:
        return self.samples.shape[1]

    def block(self, index: int, size: int) -> "Dataset":
        """Contiguous block ``[index*size, (index+1)*size)`` as a view."""
        lo = index * size
        hi = lo + size
        if lo < 0 or hi > self.n:
            raise InvalidInputError(f"block [{lo}, {hi}) out of range for n={self.n}")
        return Dataset(self.samples[lo:hi])

    def replaced(self, index: int, value: np.ndarray) -> "Dataset":
        """Copy with sample ``index`` replaced (a Hamming-1 neighbor)."""
        out = self.samples.copy()
        out[index] = np.asarray(value, dtype=float).reshape(self.sample_dim)
        return Dataset(out)


def hamming_distance(a: Dataset, b: Dataset) -> int:
    if a.n != b.n or a.sample_dim != b.sample_dim:
        raise InvalidInputError("datasets must have identical shape")
    return int(np.sum(np.any(a.samples != b.samples, axis=1)))


# ---------------------------------------------------------------------------
# Privacy budgets and growth certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrivacyParams:
    """An (epsilon, delta) budget; delta = 0 denotes pure DP."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise InvalidInputError(f"epsilon must be finite and positive, got {self.epsilon}")
        if not (0.0 <= self.delta < 1.0):
            raise InvalidInputError(f"delta must lie in [0, 1), got {self.delta}")

    @property
    def is_pure(self) -> bool:
        return self.delta == 0.0


@dataclass(frozen=True)
class GrowthSpec:
    """Certified growth of an objective around its minimizer.

    ``lam`` and ``kappa`` describe the instance (f - f* >= (lam/kappa) * r^kappa);
    ``kappa_lower`` is the lower estimate handed to algorithms.  kappa = 1 is
    accepted as a degenerate sharp-growth certificate for verification only;
    the adaptive algorithms require kappa_lower > 1.
    """

    lam: float
    kappa: float
    kappa_lower: float = 0.0

    def __post_init__(self):
        if not (self.lam > 0):
            raise InvalidInputError("growth constant must be positive")
        if not (self.kappa >= 1):
            raise InvalidInputError("growth exponent must be >= 1")
        if self.kappa_lower == 0.0:
            object.__setattr__(self, "kappa_lower", self.kappa)
        if not (self.kappa_lower <= self.kappa):
            raise InvalidInputError("kappa_lower cannot exceed kappa")


# ---------------------------------------------------------------------------
# Domains (intersections of Euclidean balls) and projection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Domain:
    """A Euclidean ball, optionally intersected with an enclosing Domain.

    The feasible set is the intersection of all balls along the parent chain.
    Callers are responsible for keeping that intersection nonempty (every
    construction in this package centers child balls at feasible points).
    """

    center: np.ndarray
    radius: float
    parent: "Domain | None" = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        if not np.all(np.isfinite(c)):
            raise InvalidInputError("domain center must be finite")
        if not (self.radius >= 0 and math.isfinite(self.radius)):
            raise InvalidInputError("domain radius must be finite and >= 0")
        object.__setattr__(self, "center", c)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def balls(self) -> Iterator[tuple[np.ndarray, float]]:
        node: Domain | None = self
        while node is not None:
            yield node.center, node.radius
            node = node.parent

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return all(
            np.linalg.norm(x - c) <= r + tol for c, r in self.balls()
        )

    def diameter(self) -> float:
        """Upper bound 2 * min(radius) over the chain; exact for a single ball."""
        return 2.0 * min(r for _, r in self.balls())

    def interval(self) -> tuple[float, float]:
        """The feasible interval for one-dimensional domains."""
        if self.dim != 1:
            raise InvalidInputError("interval() requires a 1-D domain")
        lo = max(float(c[0]) - r for c, r in self.balls())
        hi = min(float(c[0]) + r for c, r in self.balls())
        return lo, hi

    def project(self, x: np.ndarray) -> np.ndarray:
        return project(self, x)


def _ball_project(x: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    diff = x - center
    dist = float(np.linalg.norm(diff))
    if dist <= radius:
        return x
    if dist == 0.0:
        return center.copy()
    return center + diff * (radius / dist)


def project(
    domain: Domain,
    x: np.ndarray,
    displacement_tol: float = 1e-10,
    max_sweeps: int = 200,
) -> np.ndarray:
    """Euclidean projection onto the domain's ball intersection.

    Single balls project radially in closed form.  Intersections run Dykstra
    alternating projections until the per-sweep displacement drops below
    ``displacement_tol`` or ``max_sweeps`` is hit.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("cannot project a non-finite point")
    balls = list(domain.balls())
    if len(balls) == 1:
        return _ball_project(x, *balls[0])
    if all(np.linalg.norm(x - c) <= r for c, r in balls):
        return x.copy()
    corrections = [np.zeros_like(x) for _ in balls]
    cur = x.copy()
    for _ in range(max_sweeps):
        prev = cur.copy()
        for i, (c, r) in enumerate(balls):
            shifted = cur + corrections[i]
            nxt = _ball_project(shifted, c, r)
            corrections[i] = shifted - nxt
            cur = nxt
        if np.linalg.norm(cur - prev) < displacement_tol:
            break
    return cur


# ---------------------------------------------------------------------------
# Loss oracles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IsotropicQuadratic:
    """Solver hint: F(x; s) = 0.5 * curvature * ||x||^2 + <linear(s), x> (+ c(s))."""

    curvature: float
    linear: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PowerNorm:
    """Solver hint: F(x; s) = coef * ||x||^power + <linear(s), x>."""

    coef: float
    power: float
    linear: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SeparableAbsolute:
    """Solver hint: F(x; s) = weight * sum_j |x_j - p_j(s)|."""

    weight: float
    points: Callable[[np.ndarray], np.ndarray]


class LossOracle:
    """A convex per-sample loss with min-norm subgradients.

    ``subgrad`` must return the minimum-norm element of the subdifferential
    (0 at a kink of |.|), and every subgradient norm must stay below the
    declared ``lipschitz`` constant on the domain of interest.  ``structure``
    optionally exposes closed-form structure to the inner solver.
    """

    lipschitz: float = 1.0
    point_dim: int = 1
    sample_dim: int = 1
    structure: IsotropicQuadratic | PowerNorm | SeparableAbsolute | None = None

    def value(self, x: np.ndarray, s: np.ndarray) -> float:
        raise NotImplementedError

    def subgrad(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # Batch paths; subclasses override with vectorized versions.
    def batch_value(self, x: np.ndarray, samples: np.ndarray) -> float:
        return float(np.mean([self.value(x, s) for s in samples]))

    def batch_subgrad(self, x: np.ndarray, samples: np.ndarray) -> np.ndarray:
        acc = np.zeros(self.point_dim)
        for s in samples:
            acc += self.subgrad(x, s)
        return acc / len(samples)

    def mean_grads(self, points: np.ndarray, samples: np.ndarray) -> np.ndarray:
        """Mean subgradient field evaluated at many points, shape (m, d)."""
        return np.stack([self.batch_subgrad(p, samples) for p in points])


class CallableLoss(LossOracle):
    """Adapter wrapping plain value/subgrad callables (used in tests)."""

    def __init__(self, value_fn, subgrad_fn, lipschitz, point_dim=1, sample_dim=1,
                 structure=None):
        self._value_fn = value_fn
        self._subgrad_fn = subgrad_fn
        self.lipschitz = float(lipschitz)
        self.point_dim = int(point_dim)
        self.sample_dim = int(sample_dim)
        self.structure = structure

    def value(self, x, s):
        return float(self._value_fn(np.asarray(x, float), np.asarray(s, float)))

    def subgrad(self, x, s):
        g = self._subgrad_fn(np.asarray(x, float), np.asarray(s, float))
        return np.atleast_1d(np.asarray(g, dtype=float))


# ---------------------------------------------------------------------------
# Probe-based verification of growth and gradient-domination
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeReport:
    """Largest observed violation of an inequality over sampled probes."""

    max_violation: float
    argmax: np.ndarray
    n_probes: int

    @property
    def passed(self) -> bool:
        return self.max_violation <= 1e-7


def _uniform_in_ball(rng: RngStream, center: np.ndarray, radius: float, m: int) -> np.ndarray:
    d = center.shape[0]
    dirs = rng.gen.standard_normal((m, d))
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radii = radius * rng.gen.random((m, 1)) ** (1.0 / d)
    return center[None, :] + dirs / norms * radii


def probe_points(
    domain: Domain,
    xstar: np.ndarray,
    n_probes: int,
    rng: RngStream | None = None,
    interior_shrink: float = 1.0,
) -> np.ndarray:
    """Probe mix: uniform draws, boundary points, and near-minimizer points.

    With ``interior_shrink < 1`` all probes are pulled strictly inside the
    base ball (used by the gradient-domination check, which is an interior
    statement for constrained problems).
    """
    if rng is None:
        rng = RngStream(0, 0)
    xstar = np.atleast_1d(np.asarray(xstar, dtype=float))
    c, r = domain.center, domain.radius * interior_shrink
    n_uniform = int(0.7 * n_probes)
    n_boundary = int(0.15 * n_probes)
    n_near = n_probes - n_uniform - n_boundary
    pts = [_uniform_in_ball(rng, c, r, n_uniform)]
    dirs = rng.gen.standard_normal((n_boundary, domain.dim))
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)
    pts.append(c[None, :] + r * dirs)
    scales = r * 10.0 ** rng.gen.uniform(-6, 0, size=(n_near, 1))
    dirs = rng.gen.standard_normal((n_near, domain.dim))
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)
    pts.append(xstar[None, :] + scales * dirs)
    out = np.vstack(pts)
    if domain.parent is not None or interior_shrink < 1.0:
        shrunk = Domain(domain.center, r, domain.parent)
        out = np.stack([project(shrunk, p) for p in out])
    else:
        out = np.stack([_ball_project(p, c, r) for p in out])
    return out


def verify_growth(
    f: Callable[[np.ndarray], float],
    xstar: np.ndarray,
    fstar: float,
    spec: GrowthSpec,
    probes: int,
    domain: Domain,
    rng: RngStream | None = None,
) -> ProbeReport:
    """Check f(x) - f* >= (lam/kappa) * ||x - x*||^kappa on sampled probes.

    Returns the largest value of the left-minus-right defect; nonpositive
    (up to 1e-7) means the growth certificate holds on the probe set.
    """
    pts = probe_points(domain, xstar, probes, rng)
    xstar = np.atleast_1d(np.asarray(xstar, dtype=float))
    worst = -math.inf
    arg = pts[0]
    coef = spec.lam / spec.kappa
    for p in pts:
        lhs = coef * float(np.linalg.norm(p - xstar)) ** spec.kappa
        violation = lhs - (float(f(p)) - fstar)
        if violation > worst:
            worst, arg = violation, p
    return ProbeReport(worst, arg, len(pts))


def verify_kl(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    xstar: np.ndarray,
    fstar: float,
    spec: GrowthSpec,
    probes: int,
    domain: Domain,
    rng: RngStream | None = None,
) -> ProbeReport:
    """Check the gradient-domination bound implied by growth on interior probes:

        f(x) - f* <= (e / lam^(1/(kappa-1))) * ||grad f(x)||^(kappa/(kappa-1)).

    ``grad`` must return the gradient where f is differentiable and the
    min-norm subgradient elsewhere.
    """
    if spec.kappa <= 1:
        raise InvalidInputError("gradient-domination check needs kappa > 1")
    pts = probe_points(domain, xstar, probes, rng, interior_shrink=0.98)
    xstar = np.atleast_1d(np.asarray(xstar, dtype=float))
    expo = spec.kappa / (spec.kappa - 1.0)
    coef = math.e / spec.lam ** (1.0 / (spec.kappa - 1.0))
    worst = -math.inf
    arg = pts[0]
    for p in pts:
        gap = float(f(p)) - fstar
        bound = coef * float(np.linalg.norm(grad(p))) ** expo
        violation = gap - bound
        if violation > worst:
            worst, arg = violation, p
    return ProbeReport(worst, arg, len(pts))
