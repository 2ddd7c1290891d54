"""Unit tests for the shared-noise Euler-Maruyama layer: increment laws,
Jacobians, coupling, paths, curves and first-passage runs."""

import math

import numpy as np
import pytest

from ibflow import (
    CurveImage,
    Ensemble,
    NoiseDraw,
    ResolutionError,
    SpectralModel,
    build_mode_set,
    evolve_curve,
    jacobian_increment,
    run_until_hit,
    simulate_paths,
    step,
    velocity_increment,
)
from conftest import random_spectral_model


def order4_set(kappa=0.8):
    return build_mode_set(SpectralModel(
        wavenumbers=(kappa,), weights=(1.0,), angular_order=4,
        solenoidal_fraction=1.0))


def light_set():
    return build_mode_set(SpectralModel(
        wavenumbers=(0.12,), weights=(1.0,), angular_order=16,
        solenoidal_fraction=1.0))


def gen(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


# --------------------------------------------------------------------------
# increments


def test_same_position_same_increment():
    ms = build_mode_set(random_spectral_model(np.random.default_rng(0)))
    noise = NoiseDraw.draw(ms, gen(1))
    pos = np.array([[0.3, -1.2], [0.3, -1.2], [5.0, 2.0]])
    inc = velocity_increment(ms, pos, noise, 0.1)
    assert np.array_equal(inc[0], inc[1])
    jac = jacobian_increment(ms, pos, noise, 0.1)
    assert np.array_equal(jac[0], jac[1])


def test_single_vs_batch_shape_and_value():
    ms = order4_set()
    noise = NoiseDraw.draw(ms, gen(2))
    x = np.array([0.7, 0.1])
    single = velocity_increment(ms, x, noise, 0.2)
    batch = velocity_increment(ms, np.array([x, [9.0, 9.0]]), noise, 0.2)
    assert single.shape == (2,)
    assert np.array_equal(single, batch[0])
    js = jacobian_increment(ms, x, noise, 0.2)
    jb = jacobian_increment(ms, np.array([x, [9.0, 9.0]]), noise, 0.2)
    assert js.shape == (2, 2)
    assert np.array_equal(js, jb[0])


def test_single_point_increment_covariance():
    # at any fixed point the increment is centred with covariance dt * Id
    ms = order4_set(kappa=0.8)
    dt = 0.3
    n = 100_000
    g = gen(3)
    x = np.array([1.3, -0.4])
    acc = np.zeros((2, 2))
    mean = np.zeros(2)
    for _ in range(n):
        du = velocity_increment(ms, x, NoiseDraw.draw(ms, g), dt)
        acc += np.outer(du, du)
        mean += du
    cov = acc / n
    mean /= n
    se_diag = dt * math.sqrt(2.0 / n)
    se_off = dt / math.sqrt(n)
    assert abs(cov[0, 0] - dt) < 3 * se_diag
    assert abs(cov[1, 1] - dt) < 3 * se_diag
    assert abs(cov[0, 1]) < 3 * se_off
    assert np.all(np.abs(mean) < 3 * math.sqrt(dt / n))


def test_two_point_cross_covariance_matches_model():
    # E[du(x) du(y)^T] = dt * b(x - y); order-4 closed form diag(1, cos kr)
    kappa, r, dt = 0.8, 1.7, 0.25
    ms = order4_set(kappa)
    g = gen(4)
    pos = np.array([[0.0, 0.0], [r, 0.0]])
    n = 40_000
    acc = np.zeros((2, 2))
    for _ in range(n):
        du = velocity_increment(ms, pos, NoiseDraw.draw(ms, g), dt)
        acc += np.outer(du[0], du[1])
    cross = acc / (n * dt)
    expected = np.diag([1.0, math.cos(kappa * r)])
    assert np.max(np.abs(cross - expected)) < 3.0 / math.sqrt(n) * 2.0


def test_jacobian_matches_finite_differences():
    ms = build_mode_set(random_spectral_model(np.random.default_rng(5)))
    noise = NoiseDraw.draw(ms, gen(6))
    rng = np.random.default_rng(7)
    h = 1e-5
    for _ in range(30):
        x = rng.normal(scale=3.0, size=2)
        jac = jacobian_increment(ms, x, noise, 1.0)
        fd = np.empty((2, 2))
        for q, e in enumerate(np.eye(2)):
            fp = velocity_increment(ms, x + h * e, noise, 1.0)
            fm = velocity_increment(ms, x - h * e, noise, 1.0)
            fd[:, q] = (fp - fm) / (2 * h)
        assert np.max(np.abs(jac - fd)) < 1e-6


def test_solenoidal_jacobian_trace_free():
    ms = build_mode_set(SpectralModel(
        wavenumbers=(0.5, 1.5), weights=(0.4, 0.6), angular_order=12,
        solenoidal_fraction=1.0))
    g = gen(8)
    rng = np.random.default_rng(9)
    for _ in range(50):
        noise = NoiseDraw.draw(ms, g)
        jac = jacobian_increment(ms, rng.normal(scale=5.0, size=2), noise, 0.7)
        assert abs(jac[0, 0] + jac[1, 1]) < 1e-12


def test_zero_noise_zero_increment():
    ms = order4_set()
    zero = NoiseDraw(xi=np.zeros(len(ms)), xi_prime=np.zeros(len(ms)))
    x = np.array([2.0, -1.0])
    assert np.array_equal(velocity_increment(ms, x, zero, 0.5), np.zeros(2))
    assert np.array_equal(jacobian_increment(ms, x, zero, 0.5), np.zeros((2, 2)))


def test_noise_length_mismatch_rejected():
    ms = order4_set()
    bad = NoiseDraw(xi=np.zeros(3), xi_prime=np.zeros(3))
    with pytest.raises(ValueError):
        velocity_increment(ms, (0.0, 0.0), bad, 0.1)
    with pytest.raises(ValueError):
        velocity_increment(ms, (0.0, 0.0), NoiseDraw.draw(ms, gen(0)), 0.0)


# --------------------------------------------------------------------------
# stepping and coupling


def test_batch_composition_does_not_change_trajectories():
    # a point's path is bit-identical whether tracked alone or in a batch
    ms = light_set()
    a = np.array([0.4, -0.7])
    others = np.array([[3.0, 1.0], [-2.0, 5.0]])
    alone = Ensemble.from_points([a])
    together = Ensemble.from_points(np.vstack([[a], others]))
    g1, g2 = gen(10), gen(10)
    for _ in range(60):
        alone = step(alone, ms, 0.05, g1)
        together = step(together, ms, 0.05, g2)
        assert np.array_equal(alone.positions[0], together.positions[0])
    assert alone.t == pytest.approx(3.0)


def test_coincident_points_stay_coincident():
    ms = light_set()
    ens = Ensemble.from_points([[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]],
                               with_jacobians=True)
    g = gen(11)
    for _ in range(50):
        ens = step(ens, ms, 0.1, g)
    assert np.array_equal(ens.positions[0], ens.positions[1])
    assert np.array_equal(ens.jacobians[0], ens.jacobians[1])
    assert not np.array_equal(ens.positions[0], ens.positions[2])


def test_displacement_second_moment():
    # E |x_T - x_0|^2 = 2 T exactly, at any dt, by the normalization b(0) = Id
    ms = order4_set(kappa=1.1)
    T, dt, n = 1.0, 0.2, 2000
    g = gen(12)
    total = 0.0
    for _ in range(n):
        ens = Ensemble.from_points([[0.0, 0.0]])
        for _ in range(int(T / dt)):
            ens = step(ens, ms, dt, g)
        total += float(np.sum(ens.positions[0] ** 2))
    mean = total / n
    se = 2.0 * T / math.sqrt(n)
    assert abs(mean - 2.0 * T) < 3 * se


def test_displacement_law_invariant_under_dt():
    ms = light_set()
    T, n = 1.0, 1500
    for seed, dt in ((13, 0.5), (14, 0.125)):
        g = gen(seed)
        total = 0.0
        for _ in range(n):
            ens = Ensemble.from_points([[0.0, 0.0]])
            for _ in range(int(T / dt)):
                ens = step(ens, ms, dt, g)
            total += float(np.sum(ens.positions[0] ** 2))
        assert abs(total / n - 2.0 * T) < 3 * (2.0 * T / math.sqrt(n))


def test_jacobian_update_left_multiplies():
    ms = light_set()
    ens = Ensemble.from_points([[0.0, 0.0]], with_jacobians=True)
    assert np.array_equal(ens.jacobians[0], np.eye(2))
    ens = step(ens, ms, 0.1, gen(15))
    assert ens.jacobians.shape == (1, 2, 2)
    assert not np.array_equal(ens.jacobians[0], np.eye(2))


# --------------------------------------------------------------------------
# path bundles


def test_simulate_paths_scaling_and_shape():
    ms = light_set()
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    ts = np.array([0.0, 0.25, 0.5, 1.0])
    bundle = simulate_paths(pts, ms, T=4.0, dt=0.5, save_times=ts, rng=gen(16))
    assert bundle.raw.shape == (3, 4, 2)
    assert np.array_equal(bundle.raw[:, 0], pts)
    assert np.array_equal(bundle.scaled, bundle.raw / 4.0)
    assert np.all(np.isfinite(bundle.raw))


def test_simulate_paths_deterministic():
    ms = light_set()
    pts = [[0.0, 0.0], [2.0, 3.0]]
    ts = np.linspace(0.0, 1.0, 5)
    b1 = simulate_paths(pts, ms, 2.0, 0.1, ts, gen(17))
    b2 = simulate_paths(pts, ms, 2.0, 0.1, ts, gen(17))
    assert np.array_equal(b1.raw, b2.raw)


def test_simulate_paths_validation():
    ms = light_set()
    ts = np.array([0.0, 1.0])
    with pytest.raises(ValueError):
        simulate_paths([[0, 0]], ms, -1.0, 0.1, ts, gen(0))
    with pytest.raises(ValueError):
        simulate_paths([[0, 0]], ms, 1.0, 2.0, ts, gen(0))
    with pytest.raises(ValueError):
        simulate_paths([[0, 0]], ms, 1.0, 0.1, [0.0, 0.5], gen(0))
    with pytest.raises(ValueError):
        simulate_paths([[0, 0]], ms, 1.0, 0.1, [0.5, 1.0], gen(0))
    with pytest.raises(ValueError):
        simulate_paths([[0, 0]], ms, 1.0, 0.1, [0.0, 0.5, 0.4, 1.0], gen(0))
    with pytest.raises(ValueError):
        # dt coarser than the smallest save gap
        simulate_paths([[0, 0]], ms, 1.0, 0.3, [0.0, 0.1, 1.0], gen(0))


# --------------------------------------------------------------------------
# curve evolution


def test_evolve_curve_zero_time_is_identity():
    curve = CurveImage.segment((0.0, 0.0), (1.0, 0.0), h_max=0.05)
    out, report = evolve_curve(curve, light_set(), 0.1, 0.0, gen(18))
    assert np.array_equal(out.vertices, curve.vertices)
    assert report.steps == 0


def test_evolve_curve_refines_and_tracks():
    curve = CurveImage.segment((0.0, 0.0), (1.0, 0.0), h_max=0.05)
    out, report = evolve_curve(curve, light_set(), 0.1, 1.0, gen(19))
    assert report.steps == 10
    assert report.n_vertices >= 50          # pre-refined to 0.02 spacing
    assert report.max_gap <= 0.05 + 1e-12
    assert np.all(np.isfinite(out.vertices))


def test_evolve_curve_vertex_cap():
    curve = CurveImage.segment((0.0, 0.0), (1.0, 0.0), h_max=0.05)
    with pytest.raises(ResolutionError, match="cap"):
        evolve_curve(curve, light_set(), 0.1, 0.1, gen(20), vertex_cap=10)


def test_curve_image_validation():
    with pytest.raises(ValueError):
        CurveImage(vertices=np.zeros((1, 2)), h_max=0.1)
    with pytest.raises(ValueError):
        CurveImage(vertices=np.zeros((3, 2)), h_max=0.0)


# --------------------------------------------------------------------------
# first-passage runs


def test_hit_at_time_zero():
    # a long segment through the target with diameter >= 1 hits immediately
    curve = CurveImage.segment((-1.0, 0.0), (1.0, 0.0), h_max=0.05)
    res = run_until_hit(curve, light_set(), (0.2, 0.0), 1.0, 0.1, 5.0, gen(21))
    assert res.hit and res.tau == 0.0
    assert res.diam_at_hit == pytest.approx(2.0, abs=1e-12)
    # target at the anchor itself behaves the same
    res0 = run_until_hit(curve, light_set(), (0.0, 0.0), 1.0, 0.1, 5.0, gen(21))
    assert res0.hit and res0.tau == 0.0


def test_small_curve_near_target_is_not_a_hit():
    # proximity alone does not count: the curve must also be large
    curve = CurveImage.segment((0.0, 0.0), (0.2, 0.0), h_max=0.5)
    res = run_until_hit(curve, light_set(), (0.1, 0.0), 1.0, 0.1, 0.5, gen(22))
    if res.hit:
        assert res.tau > 0.0
        assert res.diam_at_hit >= 1.0


def test_timeout_returns_unhit():
    curve = CurveImage.segment((0.0, 0.0), (1.0, 0.0), h_max=0.1)
    res = run_until_hit(curve, light_set(), (500.0, 0.0), 1.0, 0.5, 3.0, gen(23))
    assert not res.hit
    assert math.isnan(res.tau) and math.isnan(res.diam_at_hit)


def test_run_until_hit_validation():
    curve = CurveImage.segment((0.0, 0.0), (1.0, 0.0), h_max=0.1)
    ms = light_set()
    with pytest.raises(ValueError, match="R must be at least 1"):
        run_until_hit(curve, ms, (5.0, 0.0), 0.5, 0.1, 1.0, gen(0))
    with pytest.raises(ValueError):
        run_until_hit(curve, ms, (5.0, 0.0), 1.0, -0.1, 1.0, gen(0))
    with pytest.raises(ValueError):
        run_until_hit(curve, ms, (5.0, 0.0, 1.0), 1.0, 0.1, 1.0, gen(0))


def test_ensemble_validation():
    with pytest.raises(ValueError):
        Ensemble(t=0.0, positions=np.zeros((2, 3)))
    with pytest.raises(ValueError):
        Ensemble(t=0.0, positions=np.zeros((2, 2)), jacobians=np.zeros((3, 2, 2)))
