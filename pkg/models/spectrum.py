# models/spectrum.py
from dataclasses import dataclass
from typing import Optional

import numpy as np

from models.eigen_pair import EigenPair


@dataclass(frozen=True)
class Spectrum:
    """Hessian 的谱数据：特征分解、零空间标记、最小非零/最大特征值

    null_mask 始终记录原始零空间，hyperbolize 之后也保持不变。
    """
    eig: EigenPair
    null_mask: np.ndarray
    alpha_min: Optional[float]
    alpha_max: float

    @property
    def alphas(self):
        return self.eig.eigvals

    @property
    def dim(self):
        return self.eig.dim

    @property
    def degenerate(self):
        """全部为零特征值时 alpha_min 无定义"""
        return self.alpha_min is None

    @property
    def null_count(self):
        return int(np.count_nonzero(self.null_mask))

    @property
    def hyperbolic_mask(self):
        return ~self.null_mask

    @property
    def condition_number(self):
        if self.degenerate:
            return float('nan')
        return self.alpha_max / self.alpha_min

    def with_alphas(self, alphas, alpha_min=None, alpha_max=None):
        """返回替换特征值后的新谱，特征向量与零空间标记不变"""
        alphas = np.asarray(alphas, dtype=np.float64)
        return Spectrum(
            eig=EigenPair(eigvals=alphas, eigvecs=self.eig.eigvecs),
            null_mask=self.null_mask,
            alpha_min=self.alpha_min if alpha_min is None else alpha_min,
            alpha_max=self.alpha_max if alpha_max is None else alpha_max,
        )

    def to_dict(self):
        """转换为字典"""
        return {
            'dim': self.dim,
            'null_count': self.null_count,
            'alpha_min': self.alpha_min,
            'alpha_max': self.alpha_max,
            'condition_number': self.condition_number,
        }
