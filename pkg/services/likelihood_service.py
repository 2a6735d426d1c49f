# services/likelihood_service.py
import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from models.nll_report import NLLReport
from models.train_config import Rk45Config
from services.energy_service import EnergyService
from services.integrator_service import IntegratorService
from services.transform_service import TransformService, V_Z_FLOOR
from utils.errors import HifmError, ValidationError
from utils.logger import get_logger

logger = get_logger('likelihood_service')

PRIORS = ('isotropic', 'zero_com')


class LikelihoodService:
    """学习到的有限场的 RK45 积分、精确散度负对数似然与采样"""

    @staticmethod
    def _check_prior(prior, spatial_dim):
        if prior not in PRIORS:
            raise ValidationError(f"未知先验: {prior}")
        if prior == 'zero_com' and not spatial_dim:
            raise ValidationError("零质心先验需要 spatial_dim")

    @staticmethod
    def _com_projector(dim, spatial_dim):
        """零质心子空间的正交投影矩阵"""
        m = dim // spatial_dim
        block = np.eye(m) - np.full((m, m), 1.0 / m)
        return np.kron(block, np.eye(spatial_dim))

    @staticmethod
    def prior_log_density(y, prior='isotropic', spatial_dim=None):
        """标准正态先验对数密度；零质心先验在 (m−1)·spatial_dim 维子空间上归一化"""
        LikelihoodService._check_prior(prior, spatial_dim)
        y = np.asarray(y, dtype=np.float64)
        dim = y.size
        if prior == 'zero_com':
            y = EnergyService.zero_com_project(y, spatial_dim)
            dim = dim - spatial_dim
        return float(-0.5 * y @ y - 0.5 * dim * math.log(2.0 * math.pi))

    @staticmethod
    def sample_prior(rng, n, dim, prior='isotropic', spatial_dim=None):
        LikelihoodService._check_prior(prior, spatial_dim)
        draws = rng.standard_normal((n, dim))
        if prior == 'zero_com':
            draws = EnergyService.zero_com_project(draws, spatial_dim)
        return draws

    @staticmethod
    def _finite_jacobian(field, y, z, v_z_floor):
        """有限变换后场 ṽ_y 及其对 y 的雅可比（dim 次前向模式求导）"""
        dim = y.size
        x = np.append(y, z)[None, :]
        out = field.evaluate(x)[0]
        tangents = np.eye(dim + 1)[:dim]
        jac = field.jvp(np.repeat(x, dim, axis=0), tangents)  # 第 k 行是沿 e_k 的导数
        v_y, v_z = out[:-1], out[-1]
        v_zc, clamped = TransformService.clamp_v_z(v_z, v_z_floor)
        u = v_y / v_zc
        j_u = jac[:, :-1].T / v_zc
        if not clamped:
            j_u -= np.outer(v_y, jac[:, -1]) / (v_zc * v_zc)
        return u, j_u

    @staticmethod
    def finite_velocity(field, y, z, v_z_floor=V_Z_FLOOR, com_projector=None):
        x = np.append(np.asarray(y, dtype=np.float64), z)[None, :]
        out = field.evaluate(x)[0]
        v_zc, _ = TransformService.clamp_v_z(out[-1], v_z_floor)
        u = out[:-1] / v_zc
        if com_projector is not None:
            u = com_projector @ u
        return u

    @staticmethod
    def divergence_y(field, y, z, v_z_floor=V_Z_FLOOR, com_projector=None):
        """有限变换后 v_y 对 y 的精确散度；给定零质心投影时在子空间内求迹"""
        y = np.asarray(y, dtype=np.float64)
        _, j_u = LikelihoodService._finite_jacobian(field, y, float(z), v_z_floor)
        if com_projector is not None:
            return float(np.trace(com_projector @ j_u))
        return float(np.trace(j_u))

    @staticmethod
    def _nll_single(field, y, cfg, prior, spatial_dim, z_start, v_z_floor, com_projector):
        dim = y.size

        def augmented(z, state):
            u, j_u = LikelihoodService._finite_jacobian(field, state[:dim], z, v_z_floor)
            if com_projector is not None:
                u = com_projector @ u
                div = np.trace(com_projector @ j_u)
            else:
                div = np.trace(j_u)
            return np.append(u, div)

        state0 = np.append(y, 0.0)
        try:
            state, nfe, diag = IntegratorService.rk45(augmented, state0, (z_start, 0.0), cfg)
        except HifmError as e:
            logger.warning(f"样本积分失败: {e}")
            return math.nan, getattr(e, 'nfe', 0), 0, 0, math.nan, math.nan, 'failed'
        prior_term = LikelihoodService.prior_log_density(state[:dim], prior, spatial_dim)
        div_term = float(state[-1])
        nll = -(prior_term + div_term)
        return nll, nfe, diag['accepted'], diag['rejected'], prior_term, div_term, 'ok'

    @staticmethod
    def _map(fn, n, threads):
        if threads and threads > 1 and n > 1:
            with ThreadPoolExecutor(max_workers=threads) as executor:
                return list(executor.map(fn, range(n)))
        return [fn(i) for i in range(n)]

    @staticmethod
    def nll(field, y_data, cfg=None, prior='isotropic', spatial_dim=None, z_start=1.0,
            v_z_floor=V_Z_FLOOR, threads=1):
        """反向积分 (y, ℓ) 从 z_start 到 0，nll = −(log p_prior(y(0)) + ℓ(0))

        Returns:
            NLLReport: 失败样本 status='failed'，nll 为 nan
        """
        cfg = cfg or Rk45Config()
        LikelihoodService._check_prior(prior, spatial_dim)
        y_data = np.atleast_2d(np.asarray(y_data, dtype=np.float64))
        com_projector = None
        if prior == 'zero_com':
            com_projector = LikelihoodService._com_projector(y_data.shape[1], spatial_dim)

        start = time.time()
        results = LikelihoodService._map(
            lambda i: LikelihoodService._nll_single(field, y_data[i], cfg, prior, spatial_dim, z_start,
                                                    v_z_floor, com_projector),
            y_data.shape[0], threads)

        columns = list(zip(*results)) if results else [()] * 7
        report = NLLReport(
            nll=np.array(columns[0], dtype=np.float64),
            nfe=np.array(columns[1], dtype=np.int64),
            accepted=np.array(columns[2], dtype=np.int64),
            rejected=np.array(columns[3], dtype=np.int64),
            prior_term=np.array(columns[4], dtype=np.float64),
            div_term=np.array(columns[5], dtype=np.float64),
            status=list(columns[6]),
        )
        summary = report.to_dict()
        if summary['failed']:
            logger.warning(f"NLL 评估有 {summary['failed']} 个样本积分失败，已跳过")
        logger.info(f"NLL 评估完成: n={summary['n']}, mean_nll={summary['mean_nll']:.4f}, "
                    f"mean_nfe={summary['mean_nfe']:.1f}, 耗时: {time.time() - start:.2f}秒")
        return report

    @staticmethod
    def sample(field, prior, cfg, rng, n, dim=None, spatial_dim=None, z_end=1.0, v_z_floor=V_Z_FLOOR,
               threads=1):
        """从先验抽样并沿有限场从 z=0 积分到 z_end

        Returns:
            tuple: (samples (n, dim), 平均 nfe)
        """
        cfg = cfg or Rk45Config()
        dim = dim or field.dim
        LikelihoodService._check_prior(prior, spatial_dim)
        y0 = LikelihoodService.sample_prior(rng, n, dim, prior, spatial_dim)
        com_projector = LikelihoodService._com_projector(dim, spatial_dim) if prior == 'zero_com' else None

        def push(i):
            y_end, nfe, _ = IntegratorService.rk45(
                lambda z, y: LikelihoodService.finite_velocity(field, y, z, v_z_floor, com_projector),
                y0[i], (0.0, z_end), cfg)
            return y_end, nfe

        results = LikelihoodService._map(push, n, threads)
        if not results:
            return np.zeros((0, dim)), math.nan
        samples = np.stack([r[0] for r in results])
        mean_nfe = float(np.mean([r[1] for r in results]))
        return samples, mean_nfe
