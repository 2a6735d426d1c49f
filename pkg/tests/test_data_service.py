import math

import numpy as np
import pytest

from models.dataset import Dataset
from models.train_config import LangevinConfig
from services.data_service import DataService
from services.energy_service import EnergyService
from utils.errors import NumericalError, ValidationError


def _quadratic():
    return DataService.build_energy('quadratic', quad_eigvals=(1.0, 25.0))


def test_langevin_is_deterministic():
    cfg = LangevinConfig(eta=1e-2, tau=0.1, burn_in=50, thin=2, n=20, seed=4)
    a = DataService.langevin_generate(_quadratic(), cfg)
    b = DataService.langevin_generate(_quadratic(), cfg)
    np.testing.assert_array_equal(a.samples, b.samples)
    other = DataService.langevin_generate(_quadratic(), cfg.model_copy(update={'seed': 5}))
    assert not np.array_equal(a.samples, other.samples)
    assert a.name == 'langevin-quadratic'
    assert a.kind == 'generic'


def test_chains_are_thread_independent():
    cfg = LangevinConfig(eta=1e-2, tau=0.1, burn_in=20, thin=1, n=10, seed=1, n_chains=3)
    serial = DataService.langevin_generate(_quadratic(), cfg)
    parallel = DataService.langevin_generate(_quadratic(), cfg, threads=3)
    np.testing.assert_array_equal(serial.samples, parallel.samples)
    assert serial.n == 10


def test_zero_temperature_converges_to_minimum():
    cfg = LangevinConfig(eta=1e-2, tau=0.0, burn_in=2000, thin=1, n=3)
    ds = DataService.langevin_generate(_quadratic(), cfg)
    np.testing.assert_allclose(ds.samples, 0.0, atol=1e-6)
    assert DataService.mean_grad_norm(_quadratic(), ds) <= 1e-5


def _check_stationary_moments(n, thin):
    eigvals = np.array([1.0, 4.0])
    eta, tau = 0.05, 0.5
    energy = DataService.build_energy('quadratic', quad_eigvals=tuple(eigvals))
    cfg = LangevinConfig(eta=eta, tau=tau, burn_in=200, thin=thin, n=n, seed=2, n_chains=4)
    samples = DataService.langevin_generate(energy, cfg).samples
    # 离散链的平稳方差 2ητ / (1 − (1−ηα)²)，η→0 时趋于 τ/α
    var = 2.0 * eta * tau / (1.0 - (1.0 - eta * eigvals) ** 2)

    mean_se = np.sqrt(var / n)
    assert np.all(np.abs(samples.mean(axis=0)) <= 5.0 * mean_se)
    cov = np.cov(samples, rowvar=False)
    var_se = var * np.sqrt(2.0 / (n - 1))
    assert np.all(np.abs(np.diag(cov) - var) <= 5.0 * var_se)
    assert abs(cov[0, 1]) <= 5.0 * np.sqrt(var[0] * var[1] / n)


def test_stationary_covariance_matches_temperature():
    _check_stationary_moments(n=2000, thin=60)


@pytest.mark.slow
def test_stationary_covariance_over_ten_thousand_samples():
    _check_stationary_moments(n=10000, thin=100)


def test_refine_steps_reduce_gradient():
    energy = _quadratic()
    cfg = LangevinConfig(eta=1e-2, tau=0.1, burn_in=100, thin=5, n=10, seed=3)
    rough = DataService.langevin_generate(energy, cfg)
    refined = DataService.langevin_generate(energy, cfg.model_copy(update={'refine_steps': 200}))
    assert DataService.mean_grad_norm(energy, refined) < DataService.mean_grad_norm(energy, rough)


def test_divergent_chain_raises():
    cfg = LangevinConfig(eta=1.0, tau=0.0, burn_in=100, thin=1, n=1)
    with pytest.raises(NumericalError):
        DataService.langevin_generate(_quadratic(), cfg)


def test_particle_samples_are_centered():
    energy = DataService.build_energy('lj', m=3, spatial_dim=2)
    cfg = LangevinConfig(eta=1e-4, tau=0.01, burn_in=100, thin=5, n=4, seed=0)
    ds = DataService.langevin_generate(energy, cfg)
    assert ds.kind == 'particles'
    assert (ds.m, ds.spatial_dim) == (3, 2)
    np.testing.assert_allclose(ds.samples.reshape(4, 3, 2).mean(axis=1), 0.0, atol=1e-12)


def test_empty_generation():
    ds = DataService.langevin_generate(_quadratic(), LangevinConfig(n=0, burn_in=0))
    assert ds.n == 0
    assert math.isnan(DataService.mean_grad_norm(_quadratic(), ds))


def test_split_is_partition(rng):
    ds = Dataset(samples=rng.standard_normal((10, 2)), name='d')
    train, test = DataService.split(ds, 0.7, seed=0)
    assert (train.n, test.n) == (7, 3)
    rows = {tuple(r) for r in np.vstack([train.samples, test.samples])}
    assert rows == {tuple(r) for r in ds.samples}
    assert train.name == 'd-train' and test.name == 'd-test'
    again, _ = DataService.split(ds, 0.7, seed=0)
    np.testing.assert_array_equal(again.samples, train.samples)
    for frac in (0.0, 1.0):
        with pytest.raises(ValidationError):
            DataService.split(ds, frac, seed=0)


def test_preprocess_particles_is_idempotent(rng):
    ds = Dataset(samples=rng.standard_normal((4, 6)), kind='particles', m=3, spatial_dim=2)
    once = DataService.preprocess_particles(ds)
    twice = DataService.preprocess_particles(once)
    np.testing.assert_allclose(once.samples.reshape(4, 3, 2).mean(axis=1), 0.0, atol=1e-15)
    np.testing.assert_allclose(twice.samples, once.samples, atol=1e-15)
    with pytest.raises(ValidationError):
        DataService.preprocess_particles(Dataset(samples=rng.standard_normal((2, 2))))


def test_build_energy_variants():
    quad = DataService.build_energy('quadratic', quad_eigvals=(2.0, 3.0, 4.0))
    np.testing.assert_array_equal(quad.params.matrix, np.diag([2.0, 3.0, 4.0]))
    lj = DataService.build_energy('lennard_jones', m=4, spatial_dim=3, lj_sigma=0.5)
    assert lj.kind == 'lennard_jones' and lj.params.sigma == 0.5
    formation = DataService.build_energy('formation', m=4, spatial_dim=2, seed=7)
    assert len(formation.params.edges) == 6
    reference = np.random.default_rng(7).standard_normal(8)
    np.testing.assert_allclose(EnergyService.gradient(formation, reference), 0.0, atol=1e-12)
    with pytest.raises(ValidationError):
        DataService.build_energy('formation', m=1)
    with pytest.raises(ValidationError):
        DataService.build_energy('morse')
