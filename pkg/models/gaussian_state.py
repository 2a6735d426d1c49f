# models/gaussian_state.py
from dataclasses import dataclass

import numpy as np

from models.eigen_pair import EigenPair


@dataclass(frozen=True)
class GaussianState:
    """高斯状态：均值与特征基下的各方向方差"""
    mean: np.ndarray
    cov_eigvals: np.ndarray
    basis: EigenPair

    @property
    def dim(self):
        return int(self.mean.size)

    def covariance(self):
        p = self.basis.eigvecs
        return (p * self.cov_eigvals) @ p.T

    def to_dict(self):
        """转换为字典"""
        return {
            'mean': self.mean.tolist(),
            'cov_eigvals': self.cov_eigvals.tolist(),
        }


@dataclass(frozen=True)
class PathPoint:
    """路径上的一点 x = [y, z]，t 为对应的时间"""
    y: np.ndarray
    z: float
    t: float

    def to_dict(self):
        return {'y': self.y.tolist(), 'z': self.z, 't': self.t}
