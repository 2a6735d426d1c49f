# models/dataset.py
from dataclasses import dataclass

import numpy as np

from utils.errors import ValidationError

DATASET_KINDS = ('generic', 'particles')


@dataclass(frozen=True)
class Dataset:
    """样本矩阵 (n, dim) 及元信息"""
    samples: np.ndarray
    kind: str = 'generic'
    m: int = 0
    spatial_dim: int = 0
    name: str = ''

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2:
            raise ValidationError(f"样本矩阵必须是二维，实际形状 {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("样本包含非有限值")
        if self.kind not in DATASET_KINDS:
            raise ValidationError(f"未知数据集类型: {self.kind}")
        if self.kind == 'particles' and self.m * self.spatial_dim != samples.shape[1]:
            raise ValidationError(f"粒子数据维度 {samples.shape[1]} ≠ m·spatial_dim = {self.m}·{self.spatial_dim}")
        object.__setattr__(self, 'samples', samples)

    @property
    def n(self):
        return int(self.samples.shape[0])

    @property
    def dim(self):
        return int(self.samples.shape[1])

    @property
    def is_particles(self):
        return self.kind == 'particles'

    @property
    def com_dim(self):
        """零质心投影使用的空间维度；非粒子数据为 None"""
        return self.spatial_dim if self.is_particles else None

    def subset(self, indices, name=None):
        return Dataset(samples=self.samples[indices], kind=self.kind, m=self.m,
                       spatial_dim=self.spatial_dim, name=self.name if name is None else name)

    def to_dict(self):
        """转换为字典"""
        return {
            'name': self.name,
            'kind': self.kind,
            'n': self.n,
            'dim': self.dim,
            'm': self.m,
            'spatial_dim': self.spatial_dim,
        }
