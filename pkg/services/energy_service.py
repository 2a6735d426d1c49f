# services/energy_service.py
import numpy as np

from utils.errors import DomainError, ValidationError
from utils.logger import get_logger

logger = get_logger('energy_service')

COINCIDENT_TOL = 1e-12
ROTATION_TOL = 1e-8


class EnergyService:
    """能量函数：解析值/梯度/Hessian、有限差分校验、刚体运动工具与随机稳定性诊断"""

    @staticmethod
    def _check_input(e, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (e.dim,):
            raise ValidationError(f"构型维度 {y.shape} 与能量维度 {e.dim} 不一致")
        if not np.all(np.isfinite(y)):
            raise ValidationError("构型包含非有限值")
        return y

    @staticmethod
    def _pair_geometry(e, y, pairs_i, pairs_j):
        """返回成对位移 yi−yj (k, d) 及其平方距离"""
        pos = y.reshape(e.params.m, e.params.spatial_dim)
        diff = pos[pairs_i] - pos[pairs_j]
        r2 = np.sum(diff * diff, axis=1)
        return diff, r2

    @staticmethod
    def _lj_pairs(e, y):
        i, j = np.triu_indices(e.params.m, k=1)
        diff, r2 = EnergyService._pair_geometry(e, y, i, j)
        r = np.sqrt(r2)
        if np.any(r < COINCIDENT_TOL):
            k = int(np.argmin(r))
            raise DomainError(f"粒子 {i[k]} 与 {j[k]} 重合 (r={r[k]:.3e})")
        return i, j, diff, r

    @staticmethod
    def _formation_pairs(e, y):
        edges = np.asarray(e.params.edges, dtype=np.int64).reshape(-1, 2)
        i, j = edges[:, 0], edges[:, 1]
        diff, r2 = EnergyService._pair_geometry(e, y, i, j)
        return i, j, diff, r2

    @staticmethod
    def value(e, y):
        """能量值 V(y)"""
        y = EnergyService._check_input(e, y)
        if e.kind == 'quadratic':
            d = y - e.params.center
            return float(0.5 * d @ e.params.matrix @ d)
        if e.kind == 'lennard_jones':
            _, _, _, r = EnergyService._lj_pairs(e, y)
            sr6 = (e.params.sigma / r) ** 6
            return float(np.sum(4.0 * e.params.epsilon * (sr6 * sr6 - sr6)))
        # formation: V = ¼ Σ (‖yi−yj‖² − d²)²
        _, _, _, r2 = EnergyService._formation_pairs(e, y)
        s = r2 - e.params.distances ** 2
        return float(0.25 * np.sum(s * s))

    @staticmethod
    def gradient(e, y):
        """解析梯度 ∇V(y)"""
        y = EnergyService._check_input(e, y)
        if e.kind == 'quadratic':
            return e.params.matrix @ (y - e.params.center)

        m, d = e.params.m, e.params.spatial_dim
        if e.kind == 'lennard_jones':
            i, j, diff, r = EnergyService._lj_pairs(e, y)
            eps, sig = e.params.epsilon, e.params.sigma
            sr6 = (sig / r) ** 6
            dphi = 4.0 * eps * (-12.0 * sr6 * sr6 + 6.0 * sr6) / r
            pair_grad = (dphi / r)[:, None] * diff
        else:
            i, j, diff, r2 = EnergyService._formation_pairs(e, y)
            s = r2 - e.params.distances ** 2
            pair_grad = s[:, None] * diff

        grad = np.zeros((m, d))
        np.add.at(grad, i, pair_grad)
        np.add.at(grad, j, -pair_grad)
        return grad.reshape(-1)

    @staticmethod
    def hessian(e, y):
        """解析 Hessian ∇²V(y)"""
        y = EnergyService._check_input(e, y)
        if e.kind == 'quadratic':
            return e.params.matrix.copy()

        m, d = e.params.m, e.params.spatial_dim
        eye = np.eye(d)
        if e.kind == 'lennard_jones':
            i, j, diff, r = EnergyService._lj_pairs(e, y)
            eps, sig = e.params.epsilon, e.params.sigma
            sr6 = (sig / r) ** 6
            dphi = 4.0 * eps * (-12.0 * sr6 * sr6 + 6.0 * sr6) / r
            ddphi = 4.0 * eps * (156.0 * sr6 * sr6 - 42.0 * sr6) / (r * r)
            unit = diff / r[:, None]
            outer = unit[:, :, None] * unit[:, None, :]
            blocks = ddphi[:, None, None] * outer + (dphi / r)[:, None, None] * (eye - outer)
        else:
            i, j, diff, r2 = EnergyService._formation_pairs(e, y)
            s = r2 - e.params.distances ** 2
            outer = diff[:, :, None] * diff[:, None, :]
            blocks = s[:, None, None] * eye + 2.0 * outer

        h = np.zeros((m, d, m, d))
        # h[i, :, i, :] += B 等价写法，按粒子块累加
        for k in range(len(i)):
            a, b = i[k], j[k]
            h[a, :, a, :] += blocks[k]
            h[b, :, b, :] += blocks[k]
            h[a, :, b, :] -= blocks[k]
            h[b, :, a, :] -= blocks[k]
        h = h.reshape(m * d, m * d)
        return 0.5 * (h + h.T)

    @staticmethod
    def _fd_steps(y, h):
        if h <= 0:
            raise ValidationError(f"有限差分步长必须大于 0，实际 {h}")
        return h * (1.0 + np.abs(y))

    @staticmethod
    def fd_gradient(e, y, h=1e-5):
        """中心差分梯度（校验用）"""
        y = EnergyService._check_input(e, y)
        steps = EnergyService._fd_steps(y, h)
        grad = np.empty_like(y)
        for k in range(y.size):
            yp = y.copy()
            ym = y.copy()
            yp[k] += steps[k]
            ym[k] -= steps[k]
            grad[k] = (EnergyService.value(e, yp) - EnergyService.value(e, ym)) / (2.0 * steps[k])
        return grad

    @staticmethod
    def fd_hessian(e, y, h=1e-5):
        """对解析梯度做中心差分，结果对称化为 (H+Hᵀ)/2"""
        y = EnergyService._check_input(e, y)
        steps = EnergyService._fd_steps(y, h)
        hess = np.empty((y.size, y.size))
        for k in range(y.size):
            yp = y.copy()
            ym = y.copy()
            yp[k] += steps[k]
            ym[k] -= steps[k]
            hess[:, k] = (EnergyService.gradient(e, yp) - EnergyService.gradient(e, ym)) / (2.0 * steps[k])
        return 0.5 * (hess + hess.T)

    @staticmethod
    def generator_lv(e, y, b):
        """随机稳定性生成元 LV(y) = −‖∇V‖² + ½ tr(∇²V B²)"""
        b = np.asarray(b, dtype=np.float64)
        if b.shape != (e.dim, e.dim):
            raise ValidationError(f"扩散矩阵形状 {b.shape} 与能量维度 {e.dim} 不一致")
        grad = EnergyService.gradient(e, y)
        hess = EnergyService.hessian(e, y)
        return float(-grad @ grad + 0.5 * np.trace(hess @ b @ b))

    @staticmethod
    def stability_fraction(e, samples, b):
        """样本中满足 LV(y) ≤ 0 的比例"""
        samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
        if samples.shape[0] == 0:
            return float('nan')
        inside = sum(1 for y in samples if EnergyService.generator_lv(e, y, b) <= 0.0)
        return inside / samples.shape[0]

    @staticmethod
    def apply_rigid_motion(y, rotation, translation, spatial_dim):
        """逐粒子先旋转后平移"""
        rotation = np.asarray(rotation, dtype=np.float64)
        translation = np.asarray(translation, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if rotation.shape != (spatial_dim, spatial_dim) or translation.shape != (spatial_dim,):
            raise ValidationError("旋转矩阵或平移向量形状不匹配")
        if y.size % spatial_dim:
            raise ValidationError(f"构型长度 {y.size} 不能被空间维度 {spatial_dim} 整除")
        if np.linalg.norm(rotation.T @ rotation - np.eye(spatial_dim)) > ROTATION_TOL:
            raise ValidationError("旋转矩阵不正交")
        if np.linalg.det(rotation) < 0:
            raise ValidationError("旋转矩阵行列式为负（非真旋转）")
        pos = y.reshape(-1, spatial_dim)
        return (pos @ rotation.T + translation).reshape(-1)

    @staticmethod
    def zero_com_project(y, spatial_dim):
        """投影到零质心子空间，支持单个构型或 (n, dim) 批量"""
        y = np.asarray(y, dtype=np.float64)
        if y.shape[-1] % spatial_dim:
            raise ValidationError(f"构型长度 {y.shape[-1]} 不能被空间维度 {spatial_dim} 整除")
        pos = y.reshape(y.shape[:-1] + (-1, spatial_dim))
        pos = pos - pos.mean(axis=-2, keepdims=True)
        return pos.reshape(y.shape)

    @staticmethod
    def random_rotation(spatial_dim, rng):
        """高斯矩阵 QR 分解得到的随机真旋转"""
        q, r = np.linalg.qr(rng.standard_normal((spatial_dim, spatial_dim)))
        q = q * np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        return q
