import math

import numpy as np
import pytest

from dpgrowth.core import Dataset, InvalidInputError, RngStream
from dpgrowth.instances import (
    SHIPPED_INSTANCES,
    build_instance,
    make_knorm_regression,
    make_pure_convex,
    make_sharp_growth_1d,
    make_uniform_convex,
)


# ---------------------------------------------------------------------------
# Uniform-convex family
# ---------------------------------------------------------------------------


def test_uniform_convex_unbiased_minimizer_at_origin():
    inst = make_uniform_convex(d=3, kappa=2, lam=1.0, L=4.0, R=1.0, bias_delta=0.0)
    np.testing.assert_allclose(inst.xstar, np.zeros(3))
    assert inst.fstar == 0.0


def test_uniform_convex_biased_1d_closed_form():
    # Population objective 0.5 x^2 + 0.2 x: stationarity x + 0.2 = 0.
    inst = make_uniform_convex(d=1, kappa=2, lam=1.0, L=4.0, R=1.0, bias_delta=0.1)
    assert inst.pop_value(np.array([0.3])) == pytest.approx(0.5 * 0.09 + 0.2 * 0.3)
    assert inst.xstar[0] == pytest.approx(-0.2)
    assert inst.fstar == pytest.approx(-0.02)


def test_uniform_convex_kappa4_vs_grid_minimizer():
    inst = make_uniform_convex(d=1, kappa=4, lam=0.25, L=2.0, R=1.0, bias_delta=0.1)
    grid = np.arange(-1.0, 1.0 + 1e-6, 1e-6)
    vals = inst.pop_value_many(grid[:, None])
    k = int(np.argmin(vals))
    assert abs(inst.xstar[0] - grid[k]) < 1e-4
    assert abs(inst.fstar - vals[k]) < 1e-4


def test_uniform_convex_window_enforced():
    with pytest.raises(InvalidInputError):
        make_uniform_convex(d=1, kappa=2, lam=1.0, L=1.0, R=1.0)  # needs L >= 2 lam R


def test_uniform_convex_sample_support_and_mean():
    inst = make_uniform_convex(d=4, kappa=2, lam=1.0, L=2.0, R=1.0, bias_delta=0.0)
    data = inst.draw(5000, RngStream(1, 0))
    norms = np.linalg.norm(data.samples, axis=1)
    np.testing.assert_allclose(norms, 1.0)
    assert np.count_nonzero(data.samples) == 5000  # one live coordinate each


# ---------------------------------------------------------------------------
# Sharp-growth family
# ---------------------------------------------------------------------------


def test_sharp_growth_formulas():
    inst = make_sharp_growth_1d(kappa=1.5, bias_delta=0.25)
    assert inst.xstar[0] == pytest.approx(0.03125)
    assert inst.fstar == pytest.approx(0.0234375)


def test_sharp_growth_mirror_symmetry():
    plus = make_sharp_growth_1d(kappa=1.5, bias_delta=0.25, v=1)
    minus = make_sharp_growth_1d(kappa=1.5, bias_delta=0.25, v=-1)
    assert minus.xstar[0] == pytest.approx(-plus.xstar[0])
    assert minus.fstar == pytest.approx(plus.fstar)
    xs = np.linspace(-0.9, 0.9, 101)[:, None]
    np.testing.assert_allclose(
        minus.pop_value_many(xs), plus.pop_value_many(-xs), atol=1e-12
    )


def test_sharp_growth_certificates_pass():
    inst = make_sharp_growth_1d(kappa=1.5, bias_delta=0.25)
    g, k = inst.certify(probes=10_000)
    assert g.max_violation <= 1e-7
    assert k.max_violation <= 1e-7


def test_sharp_growth_rejects_bad_params():
    with pytest.raises(InvalidInputError):
        make_sharp_growth_1d(kappa=2.5, bias_delta=0.25)
    with pytest.raises(InvalidInputError):
        make_sharp_growth_1d(kappa=1.5, bias_delta=0.8)


# ---------------------------------------------------------------------------
# Power-kappa regression family
# ---------------------------------------------------------------------------


def test_knorm_noiseless_optimum_is_zero():
    inst = make_knorm_regression(d=2, kappa=2, R=1.0)
    assert inst.fstar == 0.0
    data = inst.draw(50, RngStream(2, 0))
    assert inst.emp_value(inst.xstar, data) == pytest.approx(0.0, abs=1e-24)


def test_knorm_fitted_growth_constant_positive_and_certified():
    inst = make_knorm_regression(d=2, kappa=4, R=1.0)
    assert inst.growth.lam > 0
    g, k = inst.certify(probes=10_000)
    assert g.max_violation <= 1e-7
    assert k.max_violation <= 1e-7


def test_knorm_subgrad_matches_finite_differences():
    inst = make_knorm_regression(d=2, kappa=3, R=1.0)
    rng = RngStream(3, 0)
    data = inst.draw(10, rng)
    h = 1e-6
    for _ in range(100):
        x = rng.gen.uniform(-0.6, 0.6, 2)
        s = data.samples[rng.gen.integers(0, 10)]
        g = inst.loss.subgrad(x, s)
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd = (inst.loss.value(x + e, s) - inst.loss.value(x - e, s)) / (2 * h)
            assert abs(g[j] - fd) < 1e-5


def test_knorm_population_value_matches_monte_carlo():
    inst = make_knorm_regression(d=2, kappa=2, R=1.0)
    x = np.array([0.5, -0.2])
    data = inst.draw(200_000, RngStream(4, 0))
    mc = inst.emp_value(x, data)
    se = np.std(
        np.abs(data.samples[:, 2] - data.samples[:, :2] @ x) ** 2
    ) / math.sqrt(data.n)
    assert abs(inst.pop_value(x) - mc) < 5 * se


def test_knorm_rejects_noninteger_kappa():
    with pytest.raises(InvalidInputError):
        make_knorm_regression(d=1, kappa=2.5, R=1.0)


# ---------------------------------------------------------------------------
# Pure-convex control family
# ---------------------------------------------------------------------------


def test_pure_convex_flat_variant_canonical_minimizer():
    inst = make_pure_convex(d=1, L=1.0, R=1.0, flat=True)
    assert inst.xstar[0] == 0.0
    assert inst.fstar == pytest.approx(1.0)
    xs = np.linspace(-1, 1, 21)[:, None]
    np.testing.assert_allclose(inst.pop_value_many(xs), 1.0)


def test_pure_convex_lipschitz_probe():
    inst = make_pure_convex(d=5, L=1.0, R=1.0)
    rng = RngStream(5, 0)
    data = inst.draw(100, rng)
    for _ in range(200):
        x = rng.gen.uniform(-0.4, 0.4, 5)
        s = data.samples[rng.gen.integers(0, 100)]
        assert np.linalg.norm(inst.loss.subgrad(x, s)) <= 1.0 + 1e-12


def test_pure_convex_population_closed_form():
    inst = make_pure_convex(d=2, L=1.0, R=1.0)
    # Per-coordinate mean abs deviation against Monte Carlo.
    data = inst.draw(400_000, RngStream(6, 0))
    x = np.array([0.2, -0.7])
    mc = inst.emp_value(x, data)
    assert abs(inst.pop_value(x) - mc) < 3e-3
    assert inst.fstar == pytest.approx(inst.pop_value(inst.xstar))


def test_pure_convex_empirical_minimizer_risk_decreases_with_n():
    inst = make_pure_convex(d=1, L=1.0, R=1.0)
    med = []
    for power, base_stream in ((4, 0), (7, 1), (10, 2)):
        vals = []
        for seed in range(100):
            data = inst.draw(2**power, RngStream(7, base_stream * 1000 + seed))
            x, _ = inst.empirical_min(data)
            vals.append(inst.excess_pop(x))
        med.append(np.median(vals))
    assert med[0] >= med[1] >= med[2]


def test_pure_convex_ball_constrained_empirical_min():
    inst = make_pure_convex(d=4, L=1.0, R=1.0)
    # All-coordinate extreme samples push the unconstrained median outside
    # the ball; the constrained minimizer must stay feasible and beat it.
    samples = np.full((9, 4), 0.5)
    data = Dataset(samples)
    x, f = inst.empirical_min(data)
    assert np.linalg.norm(x) <= 1.0 + 1e-9
    assert f <= inst.emp_value(np.full(4, 0.5) / np.linalg.norm(np.full(4, 0.5)), data) + 1e-9


# ---------------------------------------------------------------------------
# Cross-family checks
# ---------------------------------------------------------------------------


def test_sampler_reproducibility_all_families():
    for name, params in SHIPPED_INSTANCES:
        inst = build_instance(name, **params)
        a = inst.draw(64, RngStream(11, 5)).samples
        b = inst.draw(64, RngStream(11, 5)).samples
        assert np.array_equal(a, b), inst.description


def test_declared_lipschitz_respected_over_10k_probes():
    rng = RngStream(14, 0)
    for idx, (name, params) in enumerate(SHIPPED_INSTANCES):
        inst = build_instance(name, **params)
        d = inst.domain.dim
        data = inst.draw(200, rng.child(2 * idx))
        probe_rng = rng.child(2 * idx + 1)
        xs = probe_rng.gen.uniform(-1, 1, (10_000, d)) * inst.domain.radius
        norms = np.linalg.norm(xs, axis=1, keepdims=True)
        xs = np.where(norms > inst.domain.radius, xs * (inst.domain.radius / norms), xs)
        picks = probe_rng.gen.integers(0, 200, size=10_000)
        worst = 0.0
        for x, j in zip(xs, picks):
            worst = max(worst, float(np.linalg.norm(inst.loss.subgrad(x, data.samples[j]))))
        assert worst <= inst.loss.lipschitz + 1e-9, inst.description


def test_registry_round_trip():
    inst = build_instance("sharp_growth", kappa=1.5, bias_delta=0.25)
    assert inst.name == "sharp_growth"
    with pytest.raises(InvalidInputError):
        build_instance("mystery")


def test_empirical_min_is_a_minimum_on_probes():
    rng = RngStream(13, 0)
    for idx, (name, params) in enumerate(SHIPPED_INSTANCES):
        inst = build_instance(name, **params)
        data = inst.draw(64, rng.child(idx))
        xmin, fmin = inst.empirical_min(data)
        assert inst.emp_value(xmin, data) == pytest.approx(fmin, abs=1e-12)
        d = inst.domain.dim
        for t in range(50):
            probe = inst.domain.project(rng.gen.uniform(-1, 1, d))
            assert inst.emp_value(probe, data) >= fmin - 1e-9
