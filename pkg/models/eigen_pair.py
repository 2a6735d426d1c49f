# models/eigen_pair.py
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EigenPair:
    """对称矩阵的特征分解 A = P diag(eigvals) Pᵀ，特征值升序"""
    eigvals: np.ndarray
    eigvecs: np.ndarray

    @property
    def dim(self):
        return int(self.eigvals.shape[0])

    def reconstruct(self):
        """还原 P diag(α) Pᵀ"""
        return (self.eigvecs * self.eigvals) @ self.eigvecs.T

    def to_dict(self):
        """转换为字典"""
        return {
            'dim': self.dim,
            'eigvals': self.eigvals.tolist(),
        }
