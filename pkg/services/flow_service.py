# services/flow_service.py
import math

import numpy as np

from models.eigen_pair import EigenPair
from models.gaussian_state import GaussianState, PathPoint
from services.energy_service import EnergyService
from utils.errors import NumericalError, ValidationError
from utils.logger import get_logger

logger = get_logger('flow_service')

Z_MAX = 1.0 - 1e-4


class FlowService:
    """闭式条件概率路径与条件向量场

    所有计算在 FlowSpec 的特征基下进行：η = Pᵀ(y − y1)，每个方向独立衰减。
    """

    # ---------- 内部工具 ----------

    @staticmethod
    def _prior_mean(fs, y0):
        if y0 is None:
            return np.zeros(fs.dim)
        y0 = np.asarray(y0, dtype=np.float64)
        if y0.shape != (fs.dim,):
            raise ValidationError(f"y0 维度 {y0.shape} 与路径维度 {fs.dim} 不一致")
        return y0

    @staticmethod
    def _decay_time(fs, t):
        """e^{−αi t}"""
        if t < 0:
            raise ValidationError(f"时间必须 ≥ 0，实际 {t}")
        return np.exp(-fs.alphas * t)

    @staticmethod
    def _decay_z(fs, z):
        """(1−z)^{αi/(κ α_min)}，零特征值方向恒为 1（包括 z=1）"""
        if not 0.0 <= z <= 1.0:
            raise ValidationError(f"插值状态 z 必须在 [0, 1] 内，实际 {z}")
        rates = fs.rates
        decay = np.ones_like(rates)
        pos = rates > 0
        decay[pos] = (1.0 - z) ** rates[pos]
        return decay

    @staticmethod
    def _moments(fs, y0, decay):
        """由各方向衰减因子得到均值（特征坐标）与方差"""
        p = fs.eigvecs
        eta0 = p.T @ (y0 - fs.y1)
        eta_mean = decay * eta0
        stat = fs.stationary_variance
        var = stat + decay ** 2 * (fs.sigma0 ** 2 - stat)
        return eta_mean, var

    @staticmethod
    def _state(fs, eta_mean, var):
        mean = fs.y1 + fs.eigvecs @ eta_mean
        return GaussianState(mean=mean, cov_eigvals=var, basis=fs.spectrum.eig)

    @staticmethod
    def _field_eigen(fs, y, eta_mean, var):
        """特征坐标下的概率流场 −αη + ½β²(η − m)/var"""
        eta = fs.eigvecs.T @ (np.asarray(y, dtype=np.float64) - fs.y1)
        v = -fs.alphas * eta
        noisy = fs.beta > 0
        if np.any(var[noisy] <= 0):
            raise NumericalError("协方差在有扩散的方向上奇异")
        v[noisy] += 0.5 * fs.beta[noisy] ** 2 * (eta[noisy] - eta_mean[noisy]) / var[noisy]
        return v

    # ---------- 时间域 ----------

    @staticmethod
    def mean_cov_time(fs, y0, t):
        """µ(t) 与 Σ(t) 的闭式解"""
        y0 = FlowService._prior_mean(fs, y0)
        eta_mean, var = FlowService._moments(fs, y0, FlowService._decay_time(fs, t))
        return FlowService._state(fs, eta_mean, var)

    @staticmethod
    def stationary_mean(fs, y0):
        """t → ∞ 的均值 y1 + Π_null (y0 − y1)"""
        y0 = FlowService._prior_mean(fs, y0)
        return fs.y1 + fs.null_projector @ (y0 - fs.y1)

    @staticmethod
    def interpolant_mean(fs, t):
        """µz(t) = 1 − e^{−κ α_min t}"""
        if t < 0:
            raise ValidationError(f"时间必须 ≥ 0，实际 {t}")
        return -math.expm1(-fs.kappa * fs.alpha_min * t)

    @staticmethod
    def interpolant_field(fs, z):
        """v_z(z) = −κ α_min (z − 1)"""
        if not 0.0 <= z <= 1.0:
            raise ValidationError(f"插值状态 z 必须在 [0, 1] 内，实际 {z}")
        return -fs.kappa * fs.alpha_min * (z - 1.0)

    @staticmethod
    def time_of_interpolant(fs, z):
        """t(z) = −ln(1−z)/(κ α_min)"""
        if not 0.0 <= z < 1.0:
            raise ValidationError(f"z 必须在 [0, 1) 内才有有限时间，实际 {z}")
        return -math.log1p(-z) / (fs.kappa * fs.alpha_min)

    @staticmethod
    def interpolant_from_distance(d_t, d_0, kappa):
        """一般插值 z = 1 − (d(t)/d(0))^κ；d(0)=0 时已在终点"""
        if d_t < 0 or d_0 < 0:
            raise ValidationError("距离必须非负")
        if d_0 == 0:
            return 1.0
        return 1.0 - (d_t / d_0) ** kappa

    @staticmethod
    def distance_bound(fs, y0, t):
        """e^{−α_min t}‖y0 − y1‖₂"""
        y0 = FlowService._prior_mean(fs, y0)
        if t < 0:
            raise ValidationError(f"时间必须 ≥ 0，实际 {t}")
        return float(math.exp(-fs.alpha_min * t) * np.linalg.norm(y0 - fs.y1))

    @staticmethod
    def exact_distance(fs, y0, t):
        """‖µ(t) − µ(∞)‖₂"""
        y0 = FlowService._prior_mean(fs, y0)
        g = FlowService.mean_cov_time(fs, y0, t)
        return float(np.linalg.norm(g.mean - FlowService.stationary_mean(fs, y0)))

    @staticmethod
    def cond_field_time(fs, y, t, y0=None):
        """无限窗口条件场 (v_y, v_z)"""
        y0 = FlowService._prior_mean(fs, y0)
        decay = FlowService._decay_time(fs, t)
        eta_mean, var = FlowService._moments(fs, y0, decay)
        v_y = fs.eigvecs @ FlowService._field_eigen(fs, y, eta_mean, var)
        v_z = fs.kappa * fs.alpha_min * math.exp(-fs.kappa * fs.alpha_min * t)
        return v_y, v_z

    # ---------- 插值域 ----------

    @staticmethod
    def mean_cov_z(fs, y0, z):
        """以插值状态 z 参数化的路径 µy(z)、Σy(z)"""
        y0 = FlowService._prior_mean(fs, y0)
        eta_mean, var = FlowService._moments(fs, y0, FlowService._decay_z(fs, z))
        return FlowService._state(fs, eta_mean, var)

    @staticmethod
    def cond_field_z(fs, y, z, y0=None, z_max=Z_MAX):
        """无限选项在 z 坐标下求值：(v_y(t(z)), v_z(z))"""
        y0 = FlowService._prior_mean(fs, y0)
        if z > z_max:
            raise ValidationError(f"z={z} 超过 z_max={z_max}")
        eta_mean, var = FlowService._moments(fs, y0, FlowService._decay_z(fs, z))
        v_y = fs.eigvecs @ FlowService._field_eigen(fs, y, eta_mean, var)
        return v_y, FlowService.interpolant_field(fs, z)

    @staticmethod
    def cond_field_finite(fs, y, z, y0=None, z_max=Z_MAX):
        """有限窗口条件场 (v_y / v_z, 1)"""
        if z > z_max:
            raise ValidationError(f"z={z} 超过 z_max={z_max}，有限场在 z→1 发散")
        v_y, v_z = FlowService.cond_field_z(fs, y, z, y0, z_max)
        return v_y / v_z, 1.0

    @staticmethod
    def cond_divergence_finite(fs, z, y0=None):
        """有限条件场对 y 的散度（仿射场，与 y 无关）"""
        y0 = FlowService._prior_mean(fs, y0)
        _, var = FlowService._moments(fs, y0, FlowService._decay_z(fs, z))
        diag = -fs.alphas.copy()
        noisy = fs.beta > 0
        diag[noisy] += 0.5 * fs.beta[noisy] ** 2 / var[noisy]
        return float(np.sum(diag) / FlowService.interpolant_field(fs, z))

    # ---------- 分数与采样 ----------

    @staticmethod
    def score(g, y):
        """∇ ln N(y; µ, Σ) = −Σ⁻¹(y − µ)"""
        if np.any(g.cov_eigvals <= 0):
            k = int(np.argmin(g.cov_eigvals))
            raise NumericalError(f"第 {k} 个方向方差为 {g.cov_eigvals[k]:.3e}，协方差奇异")
        p = g.basis.eigvecs
        return -p @ ((p.T @ (np.asarray(y, dtype=np.float64) - g.mean)) / g.cov_eigvals)

    @staticmethod
    def gaussian_log_density(g, y):
        """ln N(y; µ, Σ)"""
        if np.any(g.cov_eigvals <= 0):
            raise NumericalError("协方差奇异，无法计算对数密度")
        p = g.basis.eigvecs
        w = p.T @ (np.asarray(y, dtype=np.float64) - g.mean)
        return float(-0.5 * np.sum(w * w / g.cov_eigvals)
                     - 0.5 * np.sum(np.log(g.cov_eigvals))
                     - 0.5 * g.dim * math.log(2.0 * math.pi))

    @staticmethod
    def sample_path_point(fs, z, rng, spatial_dim=None, y0=None):
        """从 N(µy(z), Σy(z)) 采样，默认 y0 取先验均值 0

        粒子体系（给定 spatial_dim）投影到零质心子空间。
        """
        y0 = FlowService._prior_mean(fs, y0)
        eta_mean, var = FlowService._moments(fs, y0, FlowService._decay_z(fs, z))
        noise = rng.standard_normal(fs.dim)
        y = fs.y1 + fs.eigvecs @ (eta_mean + np.sqrt(np.maximum(var, 0.0)) * noise)
        if spatial_dim:
            y = EnergyService.zero_com_project(y, spatial_dim)
        t = FlowService.time_of_interpolant(fs, z) if z < 1.0 else math.inf
        return PathPoint(y=y, z=float(z), t=t)

    @staticmethod
    def simulate_ou(fs, y0, t_end, dt, n_paths, rng):
        """Euler–Maruyama 模拟 dy = −A(y − y1)dt + B dw，初值 N(y0, P diag(σ²) Pᵀ)

        Returns:
            ndarray: (n_paths, dim) 的终点
        """
        y0 = FlowService._prior_mean(fs, y0)
        p = fs.eigvecs
        eta = (p.T @ (y0 - fs.y1))[None, :] + fs.sigma0 * rng.standard_normal((n_paths, fs.dim))
        n_steps = int(round(t_end / dt))
        sqrt_dt = math.sqrt(dt)
        for _ in range(n_steps):
            eta = eta - fs.alphas * eta * dt + fs.beta * sqrt_dt * rng.standard_normal((n_paths, fs.dim))
        return fs.y1 + eta @ p.T

    # ---------- 最优传输基线 ----------

    @staticmethod
    def ot_path(y1, z, sigma_min):
        """均值 z·y1，标准差 1 − (1−σ_min)z"""
        y1 = np.asarray(y1, dtype=np.float64)
        if not 0.0 <= z <= 1.0:
            raise ValidationError(f"插值状态 z 必须在 [0, 1] 内，实际 {z}")
        std = 1.0 - (1.0 - sigma_min) * z
        basis = EigenPair(eigvals=np.zeros(y1.size), eigvecs=np.eye(y1.size))
        return GaussianState(mean=z * y1, cov_eigvals=np.full(y1.size, std * std), basis=basis)

    @staticmethod
    def ot_field(y, z, y1, sigma_min):
        """(y1 − (1−σ_min)y) / (1 − (1−σ_min)z)，v_z = 1"""
        y = np.asarray(y, dtype=np.float64)
        denom = 1.0 - (1.0 - sigma_min) * z
        if denom <= 0:
            raise NumericalError(f"σ_min={sigma_min} 时 z={z} 处最优传输场奇异")
        return (np.asarray(y1, dtype=np.float64) - (1.0 - sigma_min) * y) / denom, 1.0

    @staticmethod
    def sample_ot_point(y1, z, sigma_min, rng, spatial_dim=None):
        g = FlowService.ot_path(y1, z, sigma_min)
        y = g.mean + np.sqrt(g.cov_eigvals) * rng.standard_normal(g.dim)
        if spatial_dim:
            y = EnergyService.zero_com_project(y, spatial_dim)
        return PathPoint(y=y, z=float(z), t=float(z))

    # ---------- 各向同性变体 ----------

    @staticmethod
    def isotropic_alpha_data(y1, eps):
        """α = −ln(ε/‖y1‖)：t=1 时均值距 y1 恰为 ε"""
        norm = float(np.linalg.norm(y1))
        if not 0.0 < eps < norm:
            raise ValidationError(f"需要 0 < ε < ‖y1‖={norm:.6g}，实际 ε={eps}")
        return -math.log(eps / norm)

    @staticmethod
    def isotropic_alpha_interp(eps, kappa):
        """α = −ln(ε)/κ：t=1 时 z 距 1 恰为 ε"""
        if not 0.0 < eps < 1.0:
            raise ValidationError(f"需要 0 < ε < 1，实际 {eps}")
        if kappa <= 0:
            raise ValidationError(f"kappa 必须大于 0，实际 {kappa}")
        return -math.log(eps) / kappa


class ConditionalFieldModel:
    """把一条已知路径的有限条件场包装成与 MLP 相同接口的向量场

    输出 [v_y / v_z, 1]，z 超过 z_max 时按 z_max 求值。用作似然计算的仿射解析对照。
    """

    def __init__(self, fs, y0=None, z_max=Z_MAX):
        self.fs = fs
        self.y0 = FlowService._prior_mean(fs, y0)
        self.z_max = z_max

    @property
    def dim(self):
        return self.fs.dim

    def _jacobian_diag(self, z):
        fs = self.fs
        _, var = FlowService._moments(fs, self.y0, FlowService._decay_z(fs, z))
        diag = -fs.alphas.copy()
        noisy = fs.beta > 0
        diag[noisy] += 0.5 * fs.beta[noisy] ** 2 / var[noisy]
        return diag / FlowService.interpolant_field(fs, z)

    def _finite(self, y, z):
        v, _ = FlowService.cond_field_finite(self.fs, y, min(z, self.z_max), self.y0, self.z_max)
        return v

    def evaluate(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = np.ones((x.shape[0], self.dim + 1))
        for k, row in enumerate(x):
            out[k, :-1] = self._finite(row[:-1], float(row[-1]))
        return out

    def jvp(self, x, tangents):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        tangents = np.atleast_2d(np.asarray(tangents, dtype=np.float64))
        p = self.fs.eigvecs
        out = np.zeros_like(tangents)
        h = 1e-6
        for k, (row, tan) in enumerate(zip(x, tangents)):
            y, z = row[:-1], min(float(row[-1]), self.z_max)
            out[k, :-1] = p @ (self._jacobian_diag(z) * (p.T @ tan[:-1]))
            if tan[-1] != 0.0:
                # z 方向用中心差分
                lo, hi = max(z - h, 0.0), min(z + h, self.z_max)
                dvz = (self._finite(y, hi) - self._finite(y, lo)) / (hi - lo)
                out[k, :-1] += tan[-1] * dvz
        return out
