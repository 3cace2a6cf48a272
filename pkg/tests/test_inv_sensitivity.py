import math

import numpy as np
import pytest

from dpgrowth.core import (
    CallableLoss,
    Dataset,
    Domain,
    GrowthSpec,
    InvalidInputError,
    ResourceError,
    RngStream,
)
from dpgrowth.inv_sensitivity import (
    GridDensity,
    build_density,
    default_rho,
    excess_risk_bound,
    sample,
    smoothed_grad_norm,
)
from dpgrowth.instances import build_instance


def _atom_abs_instance():
    return build_instance("pure_convex", d=1, L=1.0, R=1.0)


# ---------------------------------------------------------------------------
# Windowed gradient norms
# ---------------------------------------------------------------------------


def test_smoothed_grad_norm_at_the_minimizer_is_zero():
    inst = _atom_abs_instance()
    data = Dataset(np.full((10, 1), 0.5))
    assert smoothed_grad_norm(inst.loss, data, np.array([0.5]), 0.05, inst.domain) == 0.0


def test_smoothed_grad_norm_outside_window_is_one():
    inst = _atom_abs_instance()
    data = Dataset(np.full((10, 1), 0.5))
    got = smoothed_grad_norm(inst.loss, data, np.array([0.5 + 0.1]), 0.05, inst.domain)
    assert got == pytest.approx(1.0)


def test_smoothed_grad_norm_window_touching_minimizer_is_zero():
    inst = _atom_abs_instance()
    data = Dataset(np.full((10, 1), 0.5))
    # Off-grid center: the sign change of the mean gradient must be caught.
    got = smoothed_grad_norm(inst.loss, data, np.array([0.51]), 0.05, inst.domain)
    assert got == 0.0


# ---------------------------------------------------------------------------
# Density construction
# ---------------------------------------------------------------------------


def test_uniform_gradient_field_gives_uniform_density():
    # Linear per-sample loss: constant slope everywhere, so all scores tie.
    loss = CallableLoss(
        lambda x, s: 0.7 * float(x[0]),
        lambda x, s: np.array([0.7]),
        lipschitz=1.0,
    )
    domain = Domain(np.array([0.5]), 0.5)
    data = Dataset(np.zeros((12, 1)))
    dens = build_density(loss, data, domain, epsilon=1.0, rho=0.05)
    probs = dens.probabilities
    ratios = probs[:, None] / probs[None, :]
    assert np.max(np.abs(ratios - 1.0)) < 1e-9


def test_probabilities_normalized():
    inst = _atom_abs_instance()
    data = inst.draw(30, RngStream(1, 0))
    dens = build_density(inst.loss, data, inst.domain, epsilon=2.0, rho=0.08)
    assert abs(dens.probabilities.sum() - 1.0) <= 1e-12


def test_epsilon_to_zero_flattens_density():
    inst = _atom_abs_instance()
    data = Dataset(np.full((16, 1), 0.2))
    dens = build_density(inst.loss, data, inst.domain, epsilon=1e-9, rho=0.1)
    probs = dens.probabilities
    assert probs.max() / probs.min() == pytest.approx(1.0, abs=1e-6)


def test_atom_mass_matches_two_level_integral():
    # All samples at c: scores are 0 within rho of c and eps*n/(2L) outside
    # (up to one lattice step), so the continuous density is two-level.
    c, rho, eps, n = 0.3, 0.05, 1.0, 20
    inst = _atom_abs_instance()
    data = Dataset(np.full((n, 1), c))
    h = rho / 1000.0
    dens = build_density(inst.loss, data, inst.domain, epsilon=eps, rho=rho, h=h)
    t = 0.2
    pts = dens.points.ravel()
    mass = dens.probabilities[np.abs(pts - c) <= rho + t].sum()
    level = math.exp(-eps * n / 2.0)
    window, outside = 2.0 * rho, 2.0 - 2.0 * rho
    z = window + outside * level
    oracle = (window + 2.0 * t * level) / z
    assert abs(mass - oracle) < 1e-3


def test_default_rho_formula():
    got = default_rho(L=2.0, lam=0.5, kappa_lower=2.0, n=100, d=1, epsilon=1.0)
    assert got == pytest.approx((2.0 / 0.5) * (1.0 / 100.0) ** 2)


def test_grid_guards():
    inst = _atom_abs_instance()
    data = inst.draw(8, RngStream(2, 0))
    with pytest.raises(InvalidInputError):
        build_density(inst.loss, data, inst.domain, epsilon=1.0, rho=0.1, h=0.05)
    with pytest.raises(ResourceError):
        build_density(inst.loss, data, inst.domain, epsilon=1.0, rho=4e-7)
    with pytest.raises(InvalidInputError):
        build_density(inst.loss, data, Domain(np.zeros(3), 1.0), epsilon=1.0, rho=0.1)


def test_density_requires_rho_or_growth():
    inst = _atom_abs_instance()
    data = inst.draw(8, RngStream(3, 0))
    with pytest.raises(InvalidInputError):
        build_density(inst.loss, data, inst.domain, epsilon=1.0)


def test_two_dimensional_density_smoke():
    inst = build_instance(
        "uniform_convex", d=2, kappa=2, lam=1.0, L=4.0, R=1.0, bias_delta=0.1
    )
    data = inst.draw(64, RngStream(4, 0))
    dens = build_density(inst.loss, data, inst.domain, epsilon=2.0, rho=0.15)
    assert abs(dens.probabilities.sum() - 1.0) <= 1e-12
    draw = sample(dens, RngStream(4, 1))
    assert inst.domain.contains(draw, tol=1e-9)
    # Mass concentrates near the empirical minimizer.
    xemp, _ = inst.empirical_min(data)
    mean = dens.probabilities @ dens.points
    assert np.linalg.norm(mean - xemp) < 0.25


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _two_point_density():
    w = np.array([math.log(3.0), math.log(1.0)])
    lp = w - math.log(4.0)
    return GridDensity(
        points=np.array([[0.0], [1.0]]),
        log_weights=w,
        log_probs=lp,
        spacing=0.25,
        rho=1.0,
    )


def test_two_point_sampling_frequencies():
    dens = _two_point_density()
    draws = sample(dens, RngStream(5, 0), size=100_000)
    frac0 = float(np.mean(draws[:, 0] == 0.0))
    se = math.sqrt(0.75 * 0.25 / 100_000)
    assert abs(frac0 - 0.75) <= 4 * se


def test_symmetric_density_mean_near_center():
    inst = _atom_abs_instance()
    data = Dataset(np.zeros((16, 1)))  # symmetric about 0
    dens = build_density(inst.loss, data, inst.domain, epsilon=1.0, rho=0.1)
    draws = sample(dens, RngStream(6, 0), size=50_000)
    spread = float(np.std(draws))
    assert abs(float(np.mean(draws))) <= 4 * spread / math.sqrt(50_000)


def test_golden_draws_frozen():
    inst = _atom_abs_instance()
    data = Dataset(np.full((20, 1), 0.3))
    dens = build_density(inst.loss, data, inst.domain, epsilon=1.0, rho=0.1)
    draws = sample(dens, RngStream(7, 0), size=5).ravel()
    np.testing.assert_allclose(
        draws, [0.35, 0.25, 0.2, 0.2, 0.375], rtol=0, atol=1e-12
    )


def test_chi_square_sanity_against_probabilities():
    inst = _atom_abs_instance()
    data = Dataset(np.full((12, 1), -0.4))
    dens = build_density(inst.loss, data, inst.domain, epsilon=1.0, rho=0.2, h=0.05)
    m = 200_000
    draws = sample(dens, RngStream(8, 0), size=m).ravel()
    pts = dens.points.ravel()
    probs = dens.probabilities
    heavy = probs > 1e-4
    for p, prob in zip(pts[heavy], probs[heavy]):
        freq = float(np.mean(np.isclose(draws, p)))
        se = math.sqrt(prob * (1 - prob) / m)
        assert abs(freq - prob) <= 4.5 * se + 1e-12


# ---------------------------------------------------------------------------
# Risk bound
# ---------------------------------------------------------------------------


def test_excess_risk_bound_frozen_value():
    got = excess_risk_bound(
        L=1.0, n=1000, epsilon=1.0, beta=0.1, d=1, R=1.0, rho=1e-3,
        growth=GrowthSpec(1.0, 2.0),
    )
    # K = ln 10 + ln(1 + 1000); bound = (2K/1000)^2 + 1e-3.
    K = math.log(10.0) + math.log(1001.0)
    assert got == pytest.approx((2.0 * K / 1000.0) ** 2 + 1e-3, abs=1e-15)
    assert got == pytest.approx(0.001339395128972778, abs=1e-12)


def test_excess_risk_bound_diverges_as_rho_shrinks():
    # Once rho is below the scale where L * rho matters, the d log(1 + R/rho)
    # term takes over and the bound increases without limit.
    rhos = [1e-4, 1e-6, 1e-8, 1e-12, 1e-20]
    vals = [
        excess_risk_bound(1.0, 1000, 1.0, 0.1, 1, 1.0, r, GrowthSpec(1.0, 2.0))
        for r in rhos
    ]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 10 * vals[0]


def test_excess_risk_bound_main_term_quarters_when_n_doubles():
    g = GrowthSpec(1.0, 2.0)
    rho = 1e-3
    main_n = excess_risk_bound(1.0, 1000, 1.0, 0.1, 1, 1.0, rho, g) - 1.0 * rho
    main_2n = excess_risk_bound(1.0, 2000, 1.0, 0.1, 1, 1.0, rho, g) - 1.0 * rho
    assert main_2n == pytest.approx(main_n / 4.0, rel=1e-12)


# ---------------------------------------------------------------------------
# Adaptive exponent across growth classes
# ---------------------------------------------------------------------------


def test_adaptive_exponent_kappa2_steeper_than_kappa4():
    # Matched (L, lam, R) instances; sweep n and compare fitted slopes of the
    # median empirical excess.  The kappa=2 slope must be strictly steeper.
    ns = (256, 512, 1024)
    seeds = 60
    slopes = {}
    for kappa in (2, 4):
        inst = build_instance(
            "uniform_convex", d=1, kappa=kappa, lam=0.25, L=2.0, R=1.0, bias_delta=0.1
        )
        medians = []
        for n in ns:
            ex = []
            for seed in range(seeds):
                st = RngStream(6100 + kappa * 17 + n, seed)
                data = inst.draw(n, st.child(0))
                dens = build_density(
                    inst.loss, data, inst.domain, epsilon=1.0, growth=inst.growth
                )
                x = sample(dens, st.child(1))
                ex.append(inst.excess_emp(x, data))
            medians.append(float(np.median(ex)))
        lx = np.log(np.array(ns, float))
        ly = np.log(np.array(medians))
        vx = lx - lx.mean()
        slopes[kappa] = float(vx @ ly / (vx @ vx))
    assert slopes[2] < slopes[4]
