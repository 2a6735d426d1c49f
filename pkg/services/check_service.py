# services/check_service.py
import math
import time

import numpy as np

from models.energy_model import EnergyModel
from models.flow_spec import FlowFlags
from models.train_config import Rk45Config
from services.energy_service import EnergyService
from services.flow_service import FlowService
from services.integrator_service import IntegratorService
from services.likelihood_service import LikelihoodService
from services.mlp_service import MlpField, MlpService
from services.spectrum_service import SpectrumService
from utils.logger import get_logger

logger = get_logger('check_service')


def _rel_err(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def _random_spd(rng, n):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q @ np.diag(rng.uniform(0.5, 5.0, n)) @ q.T


class CheckService:
    """内置验证：闭式解、传输恒等式与有限差分检查

    perturb > 0 时把扰动加到被检查的计算结果上，用于确认失败会被报告。
    """

    @staticmethod
    def _random_spec(rng, dim, hyperbolize=False):
        y1 = rng.standard_normal(dim)
        return SpectrumService.build_flow_spec(y1, _random_spd(rng, dim), c=2.0, gamma=0.05,
                                               flags=FlowFlags(hyperbolize=hyperbolize))

    @staticmethod
    def check_ou_moments(rng, perturb):
        """Euler–Maruyama 终点均值与闭式均值之差，以标准误为单位"""
        fs = CheckService._random_spec(rng, 2)
        n_paths, t_end = 4000, 1.0
        ends = FlowService.simulate_ou(fs, None, t_end, 1e-3, n_paths, rng)
        g = FlowService.mean_cov_time(fs, None, t_end)
        se = ends.std(axis=0, ddof=1) / math.sqrt(n_paths)
        z_scores = np.abs(ends.mean(axis=0) + perturb - g.mean) / se
        return float(z_scores.max()), 5.0

    @staticmethod
    def check_interpolant_identity(rng, perturb):
        worst = 0.0
        for _ in range(20):
            fs = CheckService._random_spec(rng, int(rng.integers(2, 6)))
            t = float(rng.uniform(0.0, 3.0))
            by_z = FlowService.mean_cov_z(fs, None, FlowService.interpolant_mean(fs, t))
            by_t = FlowService.mean_cov_time(fs, None, t)
            worst = max(worst, _rel_err(by_z.mean + perturb, by_t.mean), _rel_err(by_z.cov_eigvals, by_t.cov_eigvals))
        return worst, 1e-12

    @staticmethod
    def check_transport_identity(rng, perturb):
        fs = CheckService._random_spec(rng, 3)
        cfg = Rk45Config(rtol=1e-8, atol=1e-8)
        x0 = FlowService.mean_cov_z(fs, None, 0.0).mean
        z_end = 0.99
        x_end, _, _ = IntegratorService.rk45(lambda z, y: FlowService.cond_field_finite(fs, y, z)[0], x0,
                                             (0.0, z_end), cfg)
        target = FlowService.mean_cov_z(fs, None, z_end).mean
        return _rel_err(x_end + perturb, target), 1e-5

    @staticmethod
    def check_energy_derivatives(rng, perturb):
        energy = EnergyModel.lennard_jones(4, 3)
        base = np.array([[0, 0, 0], [1.1, 0, 0], [0, 1.1, 0], [0, 0, 1.1]], dtype=np.float64).reshape(-1)
        y = base + 0.05 * rng.standard_normal(base.size)
        grad_err = _rel_err(EnergyService.gradient(energy, y) + perturb, EnergyService.fd_gradient(energy, y))
        hess_err = _rel_err(EnergyService.hessian(energy, y) + perturb, EnergyService.fd_hessian(energy, y))
        return max(grad_err / 1e-6, hess_err / 1e-5), 1.0

    @staticmethod
    def check_mlp_gradient(rng, perturb):
        p = MlpService.init([4, 8, 8, 4], int(rng.integers(1 << 31)))
        y = rng.standard_normal((5, 3))
        z = rng.uniform(0.0, 1.0, 5)
        tvy = rng.standard_normal((5, 3))
        tvz = rng.uniform(0.5, 2.0, 5)
        _, grads, _, _ = MlpService.loss_and_grad(p, y, z, tvy, tvz, finite=False)
        worst = 0.0
        for _ in range(20):
            arr = int(rng.integers(len(grads)))
            flat = int(rng.integers(grads[arr].size))
            fd = MlpService.fd_gradient(p, y, z, tvy, tvz, (arr, flat), finite=False)
            analytic = grads[arr].reshape(-1)[flat] + perturb
            worst = max(worst, abs(analytic - fd) / max(1.0, abs(fd)))
        return worst, 1e-4

    @staticmethod
    def check_mlp_jvp(rng, perturb):
        p = MlpService.init([4, 8, 4], int(rng.integers(1 << 31)))
        x = rng.standard_normal(4)
        tangent = rng.standard_normal(4)
        h = 1e-5
        jvp = MlpService.jvp_batch(p, x[None, :], tangent[None, :])[0]
        fd = (MlpService.forward_batch(p, (x + h * tangent)[None, :])[0]
              - MlpService.forward_batch(p, (x - h * tangent)[None, :])[0]) / (2.0 * h)
        return _rel_err(jvp + perturb, fd), 1e-6

    @staticmethod
    def check_condition_rescale(rng, perturb):
        worst = 0.0
        for c in (1.0, 2.0, 10.0):
            s = SpectrumService.rescale_condition(SpectrumService.analyze(_random_spd(rng, 5)), c)
            ratio = s.alphas.max() / s.alphas.min()
            worst = max(worst, abs(ratio + perturb - c) / c)
        return worst, 1e-12

    @staticmethod
    def check_formation_nullspace(rng, perturb):
        """4 个智能体的三维完全图编队：恰好 6 个零特征值"""
        y = rng.standard_normal(12)
        energy = EnergyModel.formation_from_sample(y, 4, 3)
        hess = EnergyService.hessian(energy, y) + perturb * np.eye(12)
        return float(abs(SpectrumService.analyze(hess).null_count - 6)), 0.0

    @staticmethod
    def check_zero_field_nll(rng, perturb):
        field = MlpField(MlpService.zero_field(2))
        report = LikelihoodService.nll(field, np.zeros((1, 2)))
        return abs(report.nll[0] + perturb - math.log(2.0 * math.pi)), 1e-9

    CHECKS = (
        ('ou_moments', 'check_ou_moments'),
        ('interpolant_identity', 'check_interpolant_identity'),
        ('transport_identity', 'check_transport_identity'),
        ('energy_derivatives_fd', 'check_energy_derivatives'),
        ('mlp_gradient_fd', 'check_mlp_gradient'),
        ('mlp_jvp_fd', 'check_mlp_jvp'),
        ('condition_rescale', 'check_condition_rescale'),
        ('formation_nullspace', 'check_formation_nullspace'),
        ('zero_field_nll', 'check_zero_field_nll'),
    )

    @staticmethod
    def run(seed=0, perturb=0.0):
        """依次运行全部检查

        Returns:
            list: 每项 {'name', 'status', 'value', 'tolerance'}
        """
        results = []
        for name, method in CheckService.CHECKS:
            rng = np.random.default_rng([seed, len(results)])
            start = time.time()
            try:
                value, tolerance = getattr(CheckService, method)(rng, perturb)
                status = 'PASS' if value <= tolerance else 'FAIL'
            except Exception as e:
                logger.error(f"检查 {name} 异常: {e}")
                value, tolerance, status = math.nan, math.nan, 'FAIL'
            logger.info(f"{name}: {status} (value={value:.3e}, 耗时 {time.time() - start:.2f}秒)")
            results.append({'name': name, 'status': status, 'value': value, 'tolerance': tolerance})
        return results
