# services/linalg_service.py
import numpy as np

from models.eigen_pair import EigenPair
from utils.errors import NumericalError, ValidationError
from utils.logger import get_logger

logger = get_logger('linalg_service')

SYMMETRY_TOL = 1e-12
DEFAULT_EIG_TOL = 1e-12
DEFAULT_MAX_SWEEPS = 100


class LinalgService:
    """稠密对称矩阵线性代数：循环 Jacobi 特征分解、谱函数、子空间投影"""

    @staticmethod
    def check_symmetric(a, tol=SYMMETRY_TOL):
        """校验方阵、有限、对称（相对 Frobenius 范数），返回 float64 副本"""
        a = np.array(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValidationError(f"需要非空方阵，实际形状 {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("矩阵包含非有限元素")
        norm = np.linalg.norm(a)
        asym = np.linalg.norm(a - a.T)
        if asym > tol * max(norm, 1.0):
            raise ValidationError(f"矩阵不对称: ‖A−Aᵀ‖_F={asym:.3e}, ‖A‖_F={norm:.3e}")
        return a

    @staticmethod
    def off_diagonal_norm(a):
        """非对角部分的 Frobenius 范数，直接由上三角元素求和"""
        return float(np.sqrt(2.0) * np.linalg.norm(np.triu(a, 1)))

    @staticmethod
    def eigh_sym(a, tol=DEFAULT_EIG_TOL, max_sweeps=DEFAULT_MAX_SWEEPS):
        """循环 Jacobi 特征分解

        按固定的 (p, q) 行优先顺序扫描，直到非对角 Frobenius 范数
        小于 tol·‖A‖_F。特征向量符号约定：绝对值最大的分量为正（并列取首个）。

        Args:
            a: 对称矩阵
            tol: 相对收敛阈值
            max_sweeps: 最大扫描次数

        Returns:
            EigenPair: 升序特征值与正交特征向量
        """
        a = LinalgService.check_symmetric(a)
        # 对称化，消除容差内的舍入差异
        a = 0.5 * (a + a.T)
        n = a.shape[0]
        v = np.eye(n)
        norm = np.linalg.norm(a)
        threshold = tol * norm

        converged = n == 1 or norm == 0.0
        sweeps = 0
        while not converged:
            off = LinalgService.off_diagonal_norm(a)
            if off < threshold:
                converged = True
                break
            if sweeps >= max_sweeps:
                raise NumericalError(f"Jacobi 特征分解 {max_sweeps} 次扫描后未收敛，off={off:.3e}")
            sweeps += 1
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    app = a[p, p]
                    aqq = a[q, q]
                    diff = aqq - app
                    if abs(apq) * 1e100 < abs(diff):
                        # |θ| 过大时取 t ≈ 1/(2θ)
                        t = apq / diff
                    else:
                        theta = diff / (2.0 * apq)
                        t = np.copysign(1.0, theta) / (abs(theta) + np.hypot(theta, 1.0))
                    c = 1.0 / np.sqrt(t * t + 1.0)
                    s = t * c

                    col_p = a[:, p].copy()
                    col_q = a[:, q].copy()
                    a[:, p] = c * col_p - s * col_q
                    a[:, q] = s * col_p + c * col_q
                    row_p = a[p, :].copy()
                    row_q = a[q, :].copy()
                    a[p, :] = c * row_p - s * row_q
                    a[q, :] = s * row_p + c * row_q
                    a[p, q] = 0.0
                    a[q, p] = 0.0

                    vp = v[:, p].copy()
                    vq = v[:, q].copy()
                    v[:, p] = c * vp - s * vq
                    v[:, q] = s * vp + c * vq

        eigvals = np.diag(a).copy()
        order = np.argsort(eigvals, kind='stable')
        eigvals = eigvals[order]
        v = v[:, order]

        # 符号约定
        lead = np.argmax(np.abs(v), axis=0)
        signs = np.sign(v[lead, np.arange(n)])
        signs[signs == 0] = 1.0
        v = v * signs

        logger.debug(f"Jacobi 分解完成: dim={n}, sweeps={sweeps}")
        return EigenPair(eigvals=eigvals, eigvecs=v)

    @staticmethod
    def spectral_apply(pair, f, x):
        """计算 P diag(f(α)) Pᵀ x

        f 作用于特征值数组（需支持 numpy 向量化）；x 可以是向量或按列堆叠的矩阵。
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != pair.dim:
            raise ValidationError(f"维度不匹配: 矩阵 {pair.dim}, 向量 {x.shape[0]}")
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            fa = np.asarray(f(pair.eigvals), dtype=np.float64)
        fa = np.broadcast_to(fa, pair.eigvals.shape)
        bad = np.flatnonzero(~np.isfinite(fa))
        if bad.size:
            idx = int(bad[0])
            raise NumericalError(f"谱函数在第 {idx} 个特征值 α={pair.eigvals[idx]:.6g} 处非有限")
        p = pair.eigvecs
        coeff = p.T @ x
        if coeff.ndim == 1:
            return p @ (fa * coeff)
        return p @ (fa[:, None] * coeff)

    @staticmethod
    def subspace_projector(pair, mask):
        """Π = Σ_{i∈mask} p_i p_iᵀ"""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (pair.dim,):
            raise ValidationError(f"mask 长度 {mask.shape} 与维度 {pair.dim} 不一致")
        cols = pair.eigvecs[:, mask]
        return cols @ cols.T
