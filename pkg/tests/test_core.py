import math

import numpy as np
import pytest

from dpgrowth.core import (
    CallableLoss,
    Dataset,
    Domain,
    GrowthSpec,
    InvalidInputError,
    PrivacyParams,
    RngStream,
    derive_stream_key,
    hamming_distance,
    project,
    verify_growth,
    verify_kl,
)
from dpgrowth.instances import make_sharp_growth_1d, make_uniform_convex


# ---------------------------------------------------------------------------
# Seeded randomness
# ---------------------------------------------------------------------------


def test_stream_reproducibility_bit_identical():
    a = RngStream(123456789, 7).gen.random(100)
    b = RngStream(123456789, 7).gen.random(100)
    assert np.array_equal(a, b)


def test_distinct_streams_differ_and_decorrelate():
    a = RngStream(5, 0).gen.random(20000)
    b = RngStream(5, 1).gen.random(20000)
    assert not np.array_equal(a[:10], b[:10])
    corr = np.corrcoef(a, b)[0, 1]
    assert abs(corr) < 0.05


def test_stream_key_is_pure_integer_function():
    assert derive_stream_key(42, 0) == derive_stream_key(42, 0)
    keys = {derive_stream_key(42, s) for s in range(1000)}
    assert len(keys) == 1000


def test_child_streams_are_independent_of_parent_consumption():
    parent = RngStream(11, 2)
    child_before = parent.child(4).gen.random(5)
    parent.gen.random(1000)
    child_after = parent.child(4).gen.random(5)
    assert np.array_equal(child_before, child_after)


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


def test_dataset_blocks_cover_disjoint_ranges():
    data = Dataset(np.arange(10.0))
    blocks = [data.block(i, 3) for i in range(3)]
    seen = np.concatenate([b.samples.ravel() for b in blocks])
    assert np.array_equal(seen, np.arange(9.0))
    with pytest.raises(InvalidInputError):
        data.block(3, 3).block(1, 1)


def test_dataset_replace_is_hamming_one():
    data = Dataset(np.arange(6.0))
    neighbor = data.replaced(2, np.array([9.0]))
    assert hamming_distance(data, neighbor) == 1
    assert data.samples[2, 0] == 2.0  # original untouched


def test_empty_dataset_rejected():
    with pytest.raises(InvalidInputError):
        Dataset(np.zeros((0, 1)))


# ---------------------------------------------------------------------------
# Privacy params and growth specs
# ---------------------------------------------------------------------------


def test_privacy_params_validation():
    assert PrivacyParams(1.0).is_pure
    assert not PrivacyParams(1.0, 1e-6).is_pure
    with pytest.raises(InvalidInputError):
        PrivacyParams(0.0)
    with pytest.raises(InvalidInputError):
        PrivacyParams(math.inf)
    with pytest.raises(InvalidInputError):
        PrivacyParams(1.0, 1.0)


def test_growth_spec_validation():
    spec = GrowthSpec(1.0, 2.0)
    assert spec.kappa_lower == 2.0
    assert GrowthSpec(1.0, 1.0).kappa == 1.0  # degenerate check allowed
    with pytest.raises(InvalidInputError):
        GrowthSpec(0.0, 2.0)
    with pytest.raises(InvalidInputError):
        GrowthSpec(1.0, 2.0, kappa_lower=3.0)


# ---------------------------------------------------------------------------
# Projection
# ---------------------------------------------------------------------------


def test_project_radial_examples():
    ball = Domain(np.zeros(2), 1.0)
    np.testing.assert_allclose(project(ball, np.array([2.0, 0.0])), [1.0, 0.0])
    np.testing.assert_allclose(project(ball, np.array([0.3, 0.4])), [0.3, 0.4])


def _feasible_grid_argmin(balls, x, lo, hi, step):
    gx = np.arange(lo[0], hi[0] + step, step)
    gy = np.arange(lo[1], hi[1] + step, step)
    mx, my = np.meshgrid(gx, gy, indexing="ij")
    pts = np.column_stack([mx.ravel(), my.ravel()])
    feasible = np.ones(len(pts), dtype=bool)
    for c, r in balls:
        feasible &= np.linalg.norm(pts - c, axis=1) <= r
    pts = pts[feasible]
    dists = np.linalg.norm(pts - x, axis=1)
    return pts[int(np.argmin(dists))]


def _grid_projection_oracle(balls, x):
    # Dense 2-D search over feasible grid points, refined locally around the
    # coarse argmin: independent of the Dykstra code path.
    coarse = _feasible_grid_argmin(balls, x, (-2.0, -2.0), (2.0, 2.0), 2e-3)
    return _feasible_grid_argmin(balls, x, coarse - 5e-3, coarse + 5e-3, 2e-5)


def test_project_intersection_matches_grid_oracle():
    outer = Domain(np.zeros(2), 1.0)
    lens = Domain(np.array([1.5, 0.0]), 1.0, parent=outer)
    x = np.array([0.0, 5.0])
    got = project(lens, x)
    oracle = _grid_projection_oracle([(np.zeros(2), 1.0), (np.array([1.5, 0.0]), 1.0)], x)
    assert np.linalg.norm(got - oracle) < 1e-3
    assert lens.contains(got, tol=1e-9)


def test_project_idempotent_and_nonexpansive():
    rng = RngStream(3, 0)
    outer = Domain(np.array([0.0, 0.0, 0.0]), 1.0)
    lens = Domain(np.array([0.5, 0.0, 0.0]), 0.8, parent=outer)
    for _ in range(200):
        x = rng.gen.normal(0, 2, 3)
        y = rng.gen.normal(0, 2, 3)
        px, py = project(lens, x), project(lens, y)
        assert np.linalg.norm(project(lens, px) - px) <= 1e-12
        assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-9
        assert outer.contains(px, tol=1e-9)  # projected point lies in the parent


def test_project_rejects_nonfinite():
    with pytest.raises(InvalidInputError):
        project(Domain(np.zeros(1), 1.0), np.array([math.nan]))


def test_domain_diameter_and_interval():
    outer = Domain(np.zeros(1), 1.0)
    inner = Domain(np.array([0.5]), 0.2, parent=outer)
    assert inner.diameter() == pytest.approx(0.4)
    assert inner.interval() == pytest.approx((0.3, 0.7))
    assert outer.diameter() == pytest.approx(2.0)


def test_zero_radius_projection_returns_center():
    dom = Domain(np.array([0.3, -0.1]), 0.0)
    np.testing.assert_allclose(project(dom, np.array([5.0, 5.0])), [0.3, -0.1])


# ---------------------------------------------------------------------------
# Growth / gradient-domination verification
# ---------------------------------------------------------------------------


def test_verify_growth_half_quadratic_is_tight():
    dom = Domain(np.zeros(1), 1.0)
    spec = GrowthSpec(1.0, 2.0)
    rep = verify_growth(lambda x: 0.5 * x[0] ** 2, np.zeros(1), 0.0, spec, 2000, dom)
    assert rep.max_violation <= 1e-12  # equality case: (lam/kappa) x^2 = f


def test_verify_growth_absolute_value_degenerate_kappa_one():
    dom = Domain(np.zeros(1), 1.0)
    spec = GrowthSpec(1.0, 1.0)
    rep = verify_growth(lambda x: abs(x[0]), np.zeros(1), 0.0, spec, 2000, dom)
    assert rep.max_violation <= 1e-12


def test_verify_growth_detects_violations():
    dom = Domain(np.zeros(1), 1.0)
    spec = GrowthSpec(4.0, 2.0)  # claims 2 x^2 <= 0.5 x^2: false
    rep = verify_growth(lambda x: 0.5 * x[0] ** 2, np.zeros(1), 0.0, spec, 2000, dom)
    assert rep.max_violation > 0.1


def test_verify_growth_sharp_instance_grid_oracle():
    # Independent dense-grid evaluation of the same defect quantity.
    inst = make_sharp_growth_1d(kappa=1.5, bias_delta=0.25)
    grid = np.linspace(-1.0, 1.0, 10_001)
    vals = inst.pop_value_many(grid[:, None])
    defect = (1.0 / 1.5) * np.abs(grid - inst.xstar[0]) ** 1.5 - (vals - inst.fstar)
    assert defect.max() <= 1e-7
    rep = verify_growth(
        inst._pop_value, inst.xstar, inst.fstar, inst.growth, 10_000, inst.domain
    )
    assert rep.max_violation <= 1e-7


def test_verify_kl_closed_form_example():
    # f = (lam/kappa)|x|^kappa with kappa=2, lam=1 at x=0.5:
    # gap = 0.125, gradient 0.5, bound = e * 0.25.
    gap = 0.125
    bound = math.e * 0.25
    assert gap - bound < 0
    dom = Domain(np.zeros(1), 1.0)
    spec = GrowthSpec(1.0, 2.0)
    rep = verify_kl(
        lambda x: 0.5 * x[0] ** 2,
        lambda x: np.array([x[0]]),
        np.zeros(1),
        0.0,
        spec,
        2000,
        dom,
    )
    assert rep.max_violation <= 1e-9


def test_verify_kl_zero_at_minimizer():
    spec = GrowthSpec(1.0, 2.0)
    f = lambda x: 0.5 * x[0] ** 2
    g = lambda x: np.array([x[0]])
    x = np.zeros(1)
    assert f(x) - math.e * np.linalg.norm(g(x)) ** 2 == 0.0


def test_verify_kl_kappa4_instance_interior_probes():
    inst = make_uniform_convex(d=1, kappa=4, lam=0.25, L=2.0, R=1.0, bias_delta=0.1)
    rep = verify_kl(
        inst._pop_value,
        inst._pop_grad,
        inst.xstar,
        inst.fstar,
        inst.growth,
        1000,
        inst.domain,
    )
    assert rep.max_violation <= 1e-7


# ---------------------------------------------------------------------------
# Loss oracle contract
# ---------------------------------------------------------------------------


def test_callable_loss_batch_defaults():
    loss = CallableLoss(
        lambda x, s: float((x[0] - s[0]) ** 2),
        lambda x, s: np.array([2.0 * (x[0] - s[0])]),
        lipschitz=4.0,
    )
    samples = np.array([[0.0], [1.0]])
    x = np.array([0.25])
    assert loss.batch_value(x, samples) == pytest.approx(0.5 * (0.0625 + 0.5625))
    np.testing.assert_allclose(loss.batch_subgrad(x, samples), [2 * 0.25 - 1.0])


def test_subgradient_bound_probes():
    inst = make_uniform_convex(d=2, kappa=3, lam=0.5, L=4.0, R=1.0, bias_delta=0.2)
    rng = RngStream(9, 0)
    data = inst.draw(50, rng)
    for _ in range(500):
        x = project(inst.domain, rng.gen.normal(0, 0.7, 2))
        s = data.samples[rng.gen.integers(0, 50)]
        assert np.linalg.norm(inst.loss.subgrad(x, s)) <= inst.loss.lipschitz + 1e-12


def test_convexity_along_segments():
    inst = make_sharp_growth_1d(kappa=1.5, bias_delta=0.25)
    rng = RngStream(10, 0)
    for _ in range(500):
        x = rng.gen.uniform(-1, 1, 1)
        y = rng.gen.uniform(-1, 1, 1)
        alpha = rng.gen.random()
        s = np.array([1.0 if rng.gen.random() < 0.5 else -1.0])
        mid = alpha * x + (1 - alpha) * y
        lhs = inst.loss.value(mid, s)
        rhs = alpha * inst.loss.value(x, s) + (1 - alpha) * inst.loss.value(y, s)
        assert lhs <= rhs + 1e-9
