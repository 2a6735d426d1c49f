# services/spectrum_service.py
import numpy as np

from models.eigen_pair import EigenPair
from models.flow_spec import FlowFlags, FlowSpec
from models.spectrum import Spectrum
from services.linalg_service import LinalgService
from utils.errors import NotAMinimumError, NumericalError, ValidationError
from utils.logger import get_logger

logger = get_logger('spectrum_service')

DEFAULT_ZERO_TOL = 1e-8


class SpectrumService:
    """Hessian → 流定义谱数据：零空间划分、条件数缩放、双曲化、扩散系数"""

    @staticmethod
    def _from_eigvals(eig, null_mask):
        alphas = eig.eigvals
        nonzero = alphas[~null_mask]
        alpha_min = float(nonzero.min()) if nonzero.size else None
        alpha_max = float(alphas.max()) if alphas.size else 0.0
        return Spectrum(eig=eig, null_mask=null_mask, alpha_min=alpha_min, alpha_max=alpha_max)

    @staticmethod
    def analyze(a, zero_tol=DEFAULT_ZERO_TOL):
        """特征分解并标记零空间，零特征值精确置 0"""
        eig = LinalgService.eigh_sym(a)
        alphas = eig.eigvals.copy()
        alpha_max = float(alphas.max())
        threshold = zero_tol * max(1.0, alpha_max)
        if alphas.min() < -threshold:
            raise NotAMinimumError(
                f"Hessian 存在负特征值 {alphas.min():.6g}（阈值 {-threshold:.3e}），不是能量极小点"
            )
        null_mask = np.abs(alphas) <= threshold
        alphas[null_mask] = 0.0
        spectrum = SpectrumService._from_eigvals(EigenPair(alphas, eig.eigvecs), null_mask)
        if spectrum.degenerate:
            logger.warning(f"谱退化：{spectrum.dim} 个特征值全部为零")
        return spectrum

    @staticmethod
    def rescale_condition(s, c):
        """对非零特征值做仿射缩放 α ← aα + b，使 α_max/α_min = c 且 α_min 不变"""
        if c < 1:
            raise ValidationError(f"条件数 c 必须 ≥ 1，实际 {c}")
        if s.degenerate:
            return s
        alphas = s.alphas
        nonzero = alphas != 0.0
        a_min, a_max = s.alpha_min, float(alphas[nonzero].max())
        if a_max <= a_min:
            # 只有一个不同的非零特征值，条件数已为 1
            return s
        a = (c - 1.0) * a_min / (a_max - a_min)
        b = a_min * (1.0 - a)
        scaled = alphas.copy()
        scaled[nonzero] = a * alphas[nonzero] + b
        # 端点精确赋值，保证比值严格等于 c
        scaled[nonzero & (alphas == a_min)] = a_min
        scaled[nonzero & (alphas == a_max)] = c * a_min
        return s.with_alphas(scaled, alpha_min=a_min, alpha_max=max(c * a_min, float(scaled.max())))

    @staticmethod
    def hyperbolize(s):
        """零特征值替换为 α_min；null_mask 保留原始零空间"""
        if s.degenerate:
            raise NumericalError("谱完全退化，无法双曲化")
        alphas = s.alphas.copy()
        alphas[s.null_mask & (alphas == 0.0)] = s.alpha_min
        return s.with_alphas(alphas)

    @staticmethod
    def diffusion_coeffs(s, gamma, isotropize):
        """扩散系数 βi；原始零空间方向 βi = 0"""
        if gamma <= 0:
            raise ValidationError(f"gamma 必须大于 0，实际 {gamma}")
        if s.degenerate:
            return np.zeros(s.dim)
        if isotropize:
            beta = np.sqrt(2.0 * np.maximum(s.alphas, 0.0) * gamma)
        else:
            beta = np.full(s.dim, np.sqrt(2.0 * s.alpha_min * gamma))
        beta[s.null_mask] = 0.0
        return beta

    @staticmethod
    def build_flow_spec(y1, a, c=2.0, gamma=1e-10, kappa=1.0, sigma0=1.0, flags=None, zero_tol=DEFAULT_ZERO_TOL):
        """analyze → rescale_condition → (hyperbolize) → diffusion_coeffs"""
        flags = flags or FlowFlags()
        y1 = np.asarray(y1, dtype=np.float64)
        if kappa <= 0:
            raise ValidationError(f"kappa 必须大于 0，实际 {kappa}")
        spectrum = SpectrumService.analyze(a, zero_tol)
        if spectrum.dim != y1.size:
            raise ValidationError(f"Hessian 维度 {spectrum.dim} 与样本维度 {y1.size} 不一致")
        if spectrum.degenerate:
            raise NumericalError("Hessian 全为零特征值，无法构造概率路径")
        spectrum = SpectrumService.rescale_condition(spectrum, c)
        if flags.hyperbolize:
            spectrum = SpectrumService.hyperbolize(spectrum)
        beta = SpectrumService.diffusion_coeffs(spectrum, gamma, flags.isotropize)
        sigma = np.broadcast_to(np.asarray(sigma0, dtype=np.float64), (spectrum.dim,)).copy()
        if np.any(sigma <= 0):
            raise ValidationError("先验标准差必须大于 0")
        return FlowSpec(y1=y1, spectrum=spectrum, beta=beta, sigma0=sigma, kappa=float(kappa),
                        gamma=float(gamma), flags=flags)

    @staticmethod
    def isotropic_flow_spec(y1, alpha, gamma=1e-10, kappa=1.0, sigma0=1.0, flags=None):
        """A = αI 的各向同性路径（Data / Interpolant 变体）"""
        y1 = np.asarray(y1, dtype=np.float64)
        if alpha <= 0:
            raise ValidationError(f"各向同性 α 必须大于 0，实际 {alpha}")
        n = y1.size
        return SpectrumService.build_flow_spec(y1, alpha * np.eye(n), c=1.0, gamma=gamma, kappa=kappa,
                                               sigma0=sigma0, flags=flags)

    @staticmethod
    def conjugate_prior(s, y1, y0_raw, sigma1, sigma0_raw):
        """拓扑共轭先验：零空间取目标，双曲空间取给定先验

        Returns:
            tuple: (y0, 各特征方向先验标准差)
        """
        y1 = np.asarray(y1, dtype=np.float64)
        y0_raw = np.asarray(y0_raw, dtype=np.float64)
        if y1.shape != (s.dim,) or y0_raw.shape != (s.dim,):
            raise ValidationError("y1 / y0 维度与谱不一致")
        null_proj = LinalgService.subspace_projector(s.eig, s.null_mask)
        hyp_proj = LinalgService.subspace_projector(s.eig, ~s.null_mask)
        y0 = null_proj @ y1 + hyp_proj @ y0_raw
        sigma1 = np.broadcast_to(np.asarray(sigma1, dtype=np.float64), (s.dim,))
        sigma0_raw = np.broadcast_to(np.asarray(sigma0_raw, dtype=np.float64), (s.dim,))
        sigma = np.where(s.null_mask, sigma1, sigma0_raw)
        return y0, sigma
