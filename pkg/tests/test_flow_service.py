import math

import numpy as np
import pytest

from models.eigen_pair import EigenPair
from models.flow_spec import FlowFlags, FlowSpec
from models.gaussian_state import GaussianState
from models.train_config import Rk45Config
from services.flow_service import Z_MAX, FlowService
from services.integrator_service import IntegratorService
from services.spectrum_service import SpectrumService
from utils.errors import NumericalError, ValidationError


def _manual_spec(alphas, beta, y1, sigma0=1.0, kappa=1.0, gamma=1.0):
    spectrum = SpectrumService.analyze(np.diag(np.asarray(alphas, dtype=np.float64)))
    dim = spectrum.dim
    return FlowSpec(y1=np.asarray(y1, dtype=np.float64), spectrum=spectrum,
                    beta=np.broadcast_to(np.asarray(beta, dtype=np.float64), (dim,)).copy(),
                    sigma0=np.full(dim, sigma0), kappa=kappa, gamma=gamma, flags=FlowFlags())


def test_mean_cov_time_initial_condition(rng, make_spec):
    fs = make_spec(rng, 3)
    y0 = rng.standard_normal(3)
    g = FlowService.mean_cov_time(fs, y0, 0.0)
    np.testing.assert_allclose(g.mean, y0, atol=1e-14)
    np.testing.assert_allclose(g.cov_eigvals, fs.sigma0 ** 2, atol=1e-14)


def test_scalar_stationary_variance_path():
    fs = _manual_spec([1.0], math.sqrt(2.0), [1.0])
    for t in (0.0, 0.3, 2.0):
        g = FlowService.mean_cov_time(fs, np.zeros(1), t)
        assert g.mean[0] == pytest.approx(1.0 - math.exp(-t), abs=1e-15)
        assert g.cov_eigvals[0] == pytest.approx(1.0, abs=1e-15)


def test_long_time_limit_freezes_null_directions():
    fs = _manual_spec([0.0, 1.0, 3.0], [0.0, 0.4, 0.4], [1.0, 2.0, 3.0])
    y0 = np.array([-1.0, 0.5, 0.0])
    g = FlowService.mean_cov_time(fs, y0, 50.0)
    np.testing.assert_allclose(g.mean, FlowService.stationary_mean(fs, y0), atol=1e-12)
    np.testing.assert_allclose(g.mean, [-1.0, 2.0, 3.0], atol=1e-12)
    np.testing.assert_allclose(g.cov_eigvals, [1.0, 0.08, 0.16 / 6.0], rtol=1e-12)


def test_interpolant_examples():
    fs = _manual_spec([1.0], 0.0, [0.0])
    assert FlowService.interpolant_mean(fs, math.log(2.0)) == pytest.approx(0.5, abs=1e-15)
    assert FlowService.interpolant_field(fs, 1.0) == 0.0
    fs = _manual_spec([3.0], 0.0, [0.0], kappa=2.0)
    assert FlowService.interpolant_field(fs, 0.0) == pytest.approx(6.0)


def test_interpolant_time_round_trip(rng, make_spec):
    fs = make_spec(rng, 2, kappa=1.7)
    for t in (0.0, 0.1, 1.0, 4.0):
        z = FlowService.interpolant_mean(fs, t)
        assert FlowService.time_of_interpolant(fs, z) == pytest.approx(t, rel=1e-12, abs=1e-15)
    with pytest.raises(ValidationError):
        FlowService.time_of_interpolant(fs, 1.0)


def test_interpolant_from_distance_matches_bound(rng, make_spec):
    fs = make_spec(rng, 3, kappa=0.7)
    y0 = rng.standard_normal(3)
    d0 = FlowService.distance_bound(fs, y0, 0.0)
    for t in (0.2, 1.0, 3.0):
        z = FlowService.interpolant_from_distance(FlowService.distance_bound(fs, y0, t), d0, fs.kappa)
        assert z == pytest.approx(FlowService.interpolant_mean(fs, t), abs=1e-12)
    assert FlowService.interpolant_from_distance(0.0, 0.0, 1.0) == 1.0


def test_distance_bound(rng):
    fs = _manual_spec([1.0, 4.0], 0.0, [0.5, -0.5])
    y0 = rng.standard_normal(2)
    assert FlowService.distance_bound(fs, y0, 0.0) == pytest.approx(np.linalg.norm(y0 - fs.y1))
    for t in (0.1, 1.0, 10.0):
        assert FlowService.exact_distance(fs, y0, t) <= FlowService.distance_bound(fs, y0, t) + 1e-15

    iso = _manual_spec([2.0, 2.0], 0.0, [1.0, 1.0])
    for t in (0.1, 1.0):
        assert FlowService.exact_distance(iso, y0, t) == pytest.approx(FlowService.distance_bound(iso, y0, t),
                                                                       rel=1e-12)


def test_mean_cov_z_examples(rng, make_spec):
    fs = make_spec(rng, 3)
    y0 = rng.standard_normal(3)
    g = FlowService.mean_cov_z(fs, y0, 0.0)
    np.testing.assert_allclose(g.mean, y0, atol=1e-14)
    np.testing.assert_allclose(g.cov_eigvals, 1.0, atol=1e-14)

    line = _manual_spec([2.0, 2.0, 2.0], 0.0, [1.0, -2.0, 0.5], kappa=1.0)
    for z in (0.25, 0.5, 0.9):
        expected = line.y1 + (1.0 - z) * (y0 - line.y1)
        np.testing.assert_allclose(FlowService.mean_cov_z(line, y0, z).mean, expected, atol=1e-14)


def test_substitution_identity(rng, make_spec):
    for _ in range(100):
        fs = make_spec(rng, int(rng.integers(1, 7)), kappa=float(rng.uniform(0.5, 2.0)))
        y0 = rng.standard_normal(fs.dim)
        t = float(rng.uniform(0.0, 3.0))
        by_z = FlowService.mean_cov_z(fs, y0, FlowService.interpolant_mean(fs, t))
        by_t = FlowService.mean_cov_time(fs, y0, t)
        np.testing.assert_allclose(by_z.mean, by_t.mean, rtol=0, atol=1e-12)
        np.testing.assert_allclose(by_z.cov_eigvals, by_t.cov_eigvals, rtol=0, atol=1e-12)


def test_null_components_frozen_along_z(rng):
    fs = _manual_spec([0.0, 1.0, 2.0], [0.0, 0.3, 0.3], rng.standard_normal(3))
    y0 = rng.standard_normal(3)
    for z in (0.0, 0.5, 1.0):
        mean = FlowService.mean_cov_z(fs, y0, z).mean
        assert mean[0] == pytest.approx(y0[0], abs=1e-14)


def test_score_examples():
    fs = _manual_spec([1.0, 2.0], 0.0, [0.0, 0.0])
    g = FlowService.mean_cov_time(fs, np.zeros(2), 0.0)
    np.testing.assert_allclose(FlowService.score(g, [1.0, -2.0]), [-1.0, 2.0])
    np.testing.assert_allclose(FlowService.score(g, g.mean), 0.0)

    g = GaussianState(mean=np.zeros(2), cov_eigvals=np.array([1.0, 4.0]), basis=EigenPair(np.zeros(2), np.eye(2)))
    np.testing.assert_allclose(FlowService.score(g, [1.0, 2.0]), [-1.0, -0.5])


def test_score_rejects_zero_variance():
    fs = _manual_spec([1.0], 0.0, [0.0])
    g = FlowService.mean_cov_z(fs, np.zeros(1), 1.0)
    with pytest.raises(NumericalError):
        FlowService.score(g, [0.5])


def test_score_matches_log_density_gradient(rng, make_spec):
    fs = make_spec(rng, 4)
    g = FlowService.mean_cov_time(fs, rng.standard_normal(4), 0.4)
    y = rng.standard_normal(4)
    h = 1e-6
    fd = np.array([(FlowService.gaussian_log_density(g, y + h * e) - FlowService.gaussian_log_density(g, y - h * e))
                   / (2 * h) for e in np.eye(4)])
    np.testing.assert_allclose(FlowService.score(g, y), fd, atol=1e-6)


def test_cond_field_time_without_noise_on_mean():
    a = np.diag([1.0, 3.0])
    fs = _manual_spec([1.0, 3.0], 0.0, [1.0, -1.0])
    mu = FlowService.mean_cov_time(fs, np.zeros(2), 0.7).mean
    v_y, _ = FlowService.cond_field_time(fs, mu, 0.7)
    np.testing.assert_allclose(v_y, -a @ (mu - fs.y1), atol=1e-14)


def test_cond_field_time_transports_mean(rng, make_spec):
    fs = make_spec(rng, 3)
    cfg = Rk45Config(rtol=1e-10, atol=1e-10)
    y_end, _, _ = IntegratorService.rk45(lambda t, y: FlowService.cond_field_time(fs, y, t)[0],
                                         FlowService.mean_cov_time(fs, None, 0.0).mean, (0.0, 2.0), cfg)
    np.testing.assert_allclose(y_end, FlowService.mean_cov_time(fs, None, 2.0).mean, atol=1e-6)


def test_stationary_start_field_has_zero_mean(rng):
    fs = _manual_spec([1.0, 2.0], [0.5, 0.5], [0.3, -0.2])
    fs = FlowSpec(y1=fs.y1, spectrum=fs.spectrum, beta=fs.beta, sigma0=np.sqrt(fs.stationary_variance),
                  kappa=1.0, gamma=1.0)
    g = FlowService.mean_cov_time(fs, fs.y1, 0.8)
    draws = g.mean + np.sqrt(g.cov_eigvals) * rng.standard_normal((4000, 2))
    fields = np.array([FlowService.cond_field_time(fs, y, 0.8, fs.y1)[0] for y in draws])
    se = fields.std(axis=0, ddof=1) / math.sqrt(len(draws))
    assert np.all(np.abs(fields.mean(axis=0)) <= 3.0 * se + 1e-12)


def test_moment_odes_hold(rng, make_spec):
    """闭式矩对 t 的有限差分满足 µ̇ = −A(µ−y1)、Σ̇ = −2αΣ + β²"""
    fs = make_spec(rng, 3)
    y0 = rng.standard_normal(3)
    t, h = 0.6, 1e-5
    lo, mid, hi = (FlowService.mean_cov_time(fs, y0, s) for s in (t - h, t, t + h))
    a = fs.eigvecs @ np.diag(fs.alphas) @ fs.eigvecs.T
    np.testing.assert_allclose((hi.mean - lo.mean) / (2 * h), -a @ (mid.mean - fs.y1), atol=1e-6)
    np.testing.assert_allclose((hi.cov_eigvals - lo.cov_eigvals) / (2 * h),
                               -2.0 * fs.alphas * mid.cov_eigvals + fs.beta ** 2, atol=1e-6)


def test_ou_moments_match_euler_maruyama(rng, make_spec):
    for _ in range(10):
        fs = make_spec(rng, int(rng.integers(1, 5)))
        y0 = rng.standard_normal(fs.dim)
        n_paths, t_end = 10000, int(rng.integers(500, 2001)) * 1e-3
        ends = FlowService.simulate_ou(fs, y0, t_end, 1e-3, n_paths, rng)
        g = FlowService.mean_cov_time(fs, y0, t_end)
        cov = g.covariance()
        se_mean = np.sqrt(np.diag(cov) / n_paths)
        assert np.all(np.abs(ends.mean(axis=0) - g.mean) <= 5.0 * se_mean)
        d = np.diag(cov)
        se_cov = np.sqrt((np.outer(d, d) + cov ** 2) / n_paths)
        assert np.all(np.abs(np.cov(ends, rowvar=False).reshape(cov.shape) - cov) <= 5.0 * se_cov)


def test_cond_field_finite_examples(rng):
    fs = _manual_spec([2.0, 2.0], 0.0, [1.0, -1.0])
    for z in (0.0, 0.4, 0.9):
        y = FlowService.mean_cov_z(fs, np.zeros(2), z).mean
        v, one = FlowService.cond_field_finite(fs, y, z)
        np.testing.assert_allclose(v, (fs.y1 - y) / (1.0 - z), atol=1e-12)
        assert one == 1.0

    fs = _manual_spec([1.0, 3.0], 0.2, [0.5, 0.5], kappa=1.5)
    y = rng.standard_normal(2)
    v_t, _ = FlowService.cond_field_time(fs, y, 0.0)
    v_f, _ = FlowService.cond_field_finite(fs, y, 0.0)
    np.testing.assert_allclose(v_f, v_t / (1.5 * 1.0), atol=1e-14)

    with pytest.raises(ValidationError):
        FlowService.cond_field_finite(fs, y, Z_MAX + 1e-6)


def test_cond_field_finite_transports_to_z_max(rng, make_spec):
    cfg = Rk45Config(rtol=1e-8, atol=1e-8)
    for _ in range(20):
        fs = make_spec(rng, int(rng.integers(1, 5)), gamma=1e-10)
        x0 = FlowService.mean_cov_z(fs, None, 0.0).mean
        y_end, _, _ = IntegratorService.rk45(lambda z, y: FlowService.cond_field_finite(fs, y, z)[0], x0,
                                             (0.0, Z_MAX), cfg)
        target = FlowService.mean_cov_z(fs, None, Z_MAX).mean
        assert np.linalg.norm(y_end - target) <= 1e-5 * max(1.0, np.linalg.norm(target))


def test_ot_path_and_field():
    y1 = np.array([2.0, -1.0])
    g = FlowService.ot_path(y1, 0.0, 1e-5)
    np.testing.assert_array_equal(g.mean, [0.0, 0.0])
    np.testing.assert_array_equal(g.cov_eigvals, [1.0, 1.0])
    g = FlowService.ot_path(y1, 1.0, 1e-5)
    np.testing.assert_array_equal(g.mean, y1)
    np.testing.assert_allclose(np.sqrt(g.cov_eigvals), 1e-5)
    v, v_z = FlowService.ot_field(0.3 * y1, 0.3, y1, 0.0)
    np.testing.assert_allclose(v, y1)
    assert v_z == 1.0


def test_sample_path_point_prior_moments(rng, make_spec):
    fs = make_spec(rng, 2)
    draws = np.array([FlowService.sample_path_point(fs, 0.0, rng).y for _ in range(20000)])
    se = 1.0 / math.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0)) <= 4.0 * se)
    assert np.all(np.abs(np.cov(draws, rowvar=False) - np.eye(2)) <= 4.0 * math.sqrt(2.0) * se)


def test_sample_path_point_deterministic_and_degenerate(make_spec):
    fs = make_spec(np.random.default_rng(3), 3)
    a = FlowService.sample_path_point(fs, 0.4, np.random.default_rng(11))
    b = FlowService.sample_path_point(fs, 0.4, np.random.default_rng(11))
    np.testing.assert_array_equal(a.y, b.y)
    assert a.t == pytest.approx(FlowService.time_of_interpolant(fs, 0.4), abs=1e-12)

    noiseless = _manual_spec([1.0, 2.0], 0.0, [0.7, -0.3])
    point = FlowService.sample_path_point(noiseless, 1.0, np.random.default_rng(0))
    np.testing.assert_allclose(point.y, noiseless.y1, atol=1e-15)
    assert point.t == math.inf


def test_sample_path_point_zero_com(rng):
    fs = _manual_spec(np.arange(1.0, 7.0), 0.1, np.zeros(6))
    point = FlowService.sample_path_point(fs, 0.3, rng, spatial_dim=3)
    np.testing.assert_allclose(point.y.reshape(2, 3).mean(axis=0), 0.0, atol=1e-10)


def test_isotropic_alphas():
    y1 = np.array([0.6, 0.8])
    assert FlowService.isotropic_alpha_data(y1, math.exp(-5.0)) == pytest.approx(5.0)
    assert FlowService.isotropic_alpha_interp(math.exp(-1.0), 1.0) == pytest.approx(1.0)
    alpha = FlowService.isotropic_alpha_data(np.array([3.0, 4.0]), 0.1)
    assert math.exp(-alpha) * 5.0 == pytest.approx(0.1, rel=1e-14)
    with pytest.raises(ValidationError):
        FlowService.isotropic_alpha_data(y1, 2.0)
    with pytest.raises(ValidationError):
        FlowService.isotropic_alpha_interp(1.5, 1.0)
