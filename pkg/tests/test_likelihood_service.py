import math

import numpy as np
import pytest

from models.mlp_params import MlpParams
from models.train_config import Rk45Config
from services.flow_service import Z_MAX, ConditionalFieldModel, FlowService
from services.likelihood_service import LikelihoodService
from services.mlp_service import MlpField, MlpService
from utils.errors import ValidationError

TIGHT = Rk45Config(rtol=1e-9, atol=1e-9)


class _OtField:
    """条件最优传输场 [v_y, 1]，雅可比解析给出"""

    def __init__(self, y1, sigma_min):
        self.y1 = np.asarray(y1, dtype=np.float64)
        self.sigma_min = sigma_min
        self.dim = self.y1.size

    def evaluate(self, x):
        x = np.atleast_2d(x)
        return np.array([np.append(FlowService.ot_field(r[:-1], r[-1], self.y1, self.sigma_min)[0], 1.0) for r in x])

    def jvp(self, x, tangents):
        x, tangents = np.atleast_2d(x), np.atleast_2d(tangents)
        shrink = 1.0 - self.sigma_min
        out = np.zeros_like(tangents)
        for k, (row, tan) in enumerate(zip(x, tangents)):
            v_y, _ = FlowService.ot_field(row[:-1], row[-1], self.y1, self.sigma_min)
            denom = 1.0 - shrink * row[-1]
            out[k, :-1] = (-shrink * tan[:-1] + shrink * v_y * tan[-1]) / denom
        return out


class _NanField:
    dim = 2

    def evaluate(self, x):
        return np.full((np.atleast_2d(x).shape[0], 3), np.nan)

    def jvp(self, x, tangents):
        return np.zeros_like(np.atleast_2d(tangents))


def test_zero_field_nll_is_prior_density():
    field = MlpField(MlpService.zero_field(1, hidden=(4,)))
    report = LikelihoodService.nll(field, np.zeros((1, 1)))
    assert report.nll[0] == pytest.approx(0.5 * math.log(2.0 * math.pi), abs=1e-12)
    assert report.nfe[0] == 7
    assert report.status == ['ok']

    y = np.array([[1.0, -2.0, 0.5]])
    report = LikelihoodService.nll(MlpField(MlpService.zero_field(3)), y)
    expected = 0.5 * float(y[0] @ y[0]) + 1.5 * math.log(2.0 * math.pi)
    assert report.nll[0] == pytest.approx(expected, abs=1e-12)


def _affine_oracle_gap(seed, dim, make_spec):
    rng = np.random.default_rng(seed)
    fs = make_spec(rng, dim)
    g = FlowService.mean_cov_z(fs, None, Z_MAX)
    y = g.mean + 0.3 * rng.standard_normal((1, dim))
    report = LikelihoodService.nll(ConditionalFieldModel(fs), y, TIGHT, z_start=Z_MAX)
    return abs(report.nll[0] + FlowService.gaussian_log_density(g, y[0]))


def test_affine_oracle_matches_closed_form_in_one_dimension(make_spec):
    assert _affine_oracle_gap(0, 1, make_spec) <= 1e-4


@pytest.mark.parametrize('dim', [2, 3, 4, 5, 6])
def test_affine_oracle_matches_closed_form(dim, make_spec):
    # 每个维度 10 个随机路径，合计 50 次
    gaps = [_affine_oracle_gap(1000 * dim + seed, dim, make_spec) for seed in range(10)]
    assert max(gaps) <= 1e-3


def test_divergence_matches_finite_difference(rng, small_params):
    arrays = [a.copy() for a in small_params.arrays()]
    arrays[-1][-1] = 2.0
    field = MlpField(MlpParams.from_arrays(arrays))
    y, z, h = rng.standard_normal(2), 0.4, 1e-6
    fd = sum((LikelihoodService.finite_velocity(field, y + h * e, z)[k]
              - LikelihoodService.finite_velocity(field, y - h * e, z)[k]) / (2 * h)
             for k, e in enumerate(np.eye(2)))
    assert LikelihoodService.divergence_y(field, y, z) == pytest.approx(fd, abs=1e-6)


def test_zero_com_prior_is_normalized_on_subspace():
    a = 0.7
    value = LikelihoodService.prior_log_density([a, -a], 'zero_com', spatial_dim=1)
    assert value == pytest.approx(-a * a - 0.5 * math.log(2.0 * math.pi), abs=1e-14)
    shifted = LikelihoodService.prior_log_density([a + 3.0, -a + 3.0], 'zero_com', spatial_dim=1)
    assert shifted == pytest.approx(value, abs=1e-14)


def test_zero_com_nll_uses_reduced_dimension():
    field = MlpField(MlpService.zero_field(6))
    y = np.array([[0.5, 0.0, -0.2, -0.5, 0.0, 0.2]])
    report = LikelihoodService.nll(field, y, prior='zero_com', spatial_dim=3)
    expected = 0.5 * float(y[0] @ y[0]) + 1.5 * math.log(2.0 * math.pi)
    assert report.nll[0] == pytest.approx(expected, abs=1e-12)


def test_unknown_prior_rejected():
    with pytest.raises(ValidationError):
        LikelihoodService.prior_log_density(np.zeros(2), 'laplace')
    with pytest.raises(ValidationError):
        LikelihoodService.sample_prior(np.random.default_rng(0), 2, 2, 'zero_com')


def test_failed_integration_is_reported():
    report = LikelihoodService.nll(_NanField(), np.zeros((3, 2)))
    assert report.status == ['failed'] * 3
    assert np.all(np.isnan(report.nll))
    summary = report.to_dict()
    assert summary['failed'] == 3
    assert math.isnan(summary['mean_nll'])


def test_threads_do_not_change_results(rng, make_spec):
    fs = make_spec(rng, 2)
    y = rng.standard_normal((6, 2))
    serial = LikelihoodService.nll(ConditionalFieldModel(fs), y, z_start=Z_MAX)
    parallel = LikelihoodService.nll(ConditionalFieldModel(fs), y, z_start=Z_MAX, threads=3)
    np.testing.assert_array_equal(serial.nll, parallel.nll)
    np.testing.assert_array_equal(serial.nfe, parallel.nfe)


def test_nll_frame_columns(rng):
    report = LikelihoodService.nll(MlpField(MlpService.zero_field(2)), rng.standard_normal((4, 2)))
    frame = report.to_frame()
    assert list(frame.columns) == ['sample_index', 'nll', 'nfe', 'accepted', 'rejected', 'status']
    assert frame['sample_index'].tolist() == [0, 1, 2, 3]


def test_sample_is_reproducible(small_params):
    field = MlpField(small_params)
    a, nfe_a = LikelihoodService.sample(field, 'isotropic', None, np.random.default_rng(9), 5)
    b, nfe_b = LikelihoodService.sample(field, 'isotropic', None, np.random.default_rng(9), 5, threads=2)
    np.testing.assert_array_equal(a, b)
    assert nfe_a == nfe_b
    assert a.shape == (5, 2)


def test_zero_field_sample_returns_prior_draws():
    field = MlpField(MlpService.zero_field(6))
    samples, nfe = LikelihoodService.sample(field, 'zero_com', None, np.random.default_rng(2), 4, spatial_dim=3)
    prior = LikelihoodService.sample_prior(np.random.default_rng(2), 4, 6, 'zero_com', 3)
    np.testing.assert_array_equal(samples, prior)
    np.testing.assert_allclose(samples.reshape(4, 2, 3).mean(axis=1), 0.0, atol=1e-14)
    assert nfe == 7.0


def test_empty_sample_request():
    samples, nfe = LikelihoodService.sample(MlpField(MlpService.zero_field(2)), 'isotropic', None,
                                            np.random.default_rng(0), 0)
    assert samples.shape == (0, 2)
    assert math.isnan(nfe)


def test_conditional_field_divergence_is_closed_form(rng, make_spec):
    fs = make_spec(rng, 3)
    field = ConditionalFieldModel(fs)
    for z in (0.0, 0.5, 0.9):
        y = rng.standard_normal(3)
        assert LikelihoodService.divergence_y(field, y, z) == pytest.approx(
            FlowService.cond_divergence_finite(fs, z), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize('sigma_min', [0.0, 1e-5, 0.1])
def test_ot_field_divergence_at_prior_end(rng, sigma_min):
    dim = 3
    field = _OtField(rng.standard_normal(dim), sigma_min)
    y = rng.standard_normal(dim)
    assert LikelihoodService.divergence_y(field, y, 0.0) == pytest.approx(-(1.0 - sigma_min) * dim, abs=1e-14)
    z = 0.5
    expected = -(1.0 - sigma_min) * dim / (1.0 - (1.0 - sigma_min) * z)
    assert LikelihoodService.divergence_y(field, y, z) == pytest.approx(expected, rel=1e-13)
    h = 1e-6
    fd = sum((LikelihoodService.finite_velocity(field, y + h * e, z)[k]
              - LikelihoodService.finite_velocity(field, y - h * e, z)[k]) / (2 * h)
             for k, e in enumerate(np.eye(dim)))
    assert fd == pytest.approx(expected, abs=1e-6)


def test_sampled_points_have_finite_nll_at_default_tolerances():
    arrays = [a.copy() for a in MlpService.init([4, 16, 16, 4], seed=11).arrays()]
    # 输出层缩小，v_z 保持在 1 附近，远离截断
    arrays[-2] *= 0.1
    arrays[-1][-1] = 1.0
    field = MlpField(MlpParams.from_arrays(arrays))
    samples, _ = LikelihoodService.sample(field, 'isotropic', None, np.random.default_rng(2), 100)
    assert np.all(np.isfinite(samples))
    report = LikelihoodService.nll(field, samples)
    assert report.status == ['ok'] * 100
    assert np.all(np.isfinite(report.nll))
    assert np.all(np.isfinite(report.nfe))
