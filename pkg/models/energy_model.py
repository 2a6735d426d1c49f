# models/energy_model.py
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from utils.errors import ValidationError

ENERGY_KINDS = ('quadratic', 'lennard_jones', 'formation')


@dataclass(frozen=True)
class QuadraticParams:
    """二次能量 V(y) = ½ (y−y*)ᵀ A (y−y*)"""
    center: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64)
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.shape != (center.size, center.size):
            raise ValidationError(f"二次能量矩阵形状 {matrix.shape} 与中心维度 {center.size} 不一致")
        if not np.allclose(matrix, matrix.T, rtol=0, atol=1e-12 * max(1.0, np.abs(matrix).max())):
            raise ValidationError("二次能量矩阵不对称")
        eigvals = np.linalg.eigvalsh(matrix)
        if eigvals.min() < -1e-10 * max(1.0, abs(eigvals.max())):
            raise ValidationError(f"二次能量矩阵非半正定: min α={eigvals.min():.3e}")
        object.__setattr__(self, 'center', center)
        object.__setattr__(self, 'matrix', matrix)


@dataclass(frozen=True)
class LennardJonesParams:
    """Lennard-Jones 团簇参数"""
    m: int
    spatial_dim: int = 3
    epsilon: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.m < 2:
            raise ValidationError(f"粒子数必须 ≥ 2，实际 {self.m}")
        if self.spatial_dim not in (2, 3):
            raise ValidationError(f"空间维度只能为 2 或 3，实际 {self.spatial_dim}")
        if self.epsilon <= 0 or self.sigma <= 0:
            raise ValidationError("epsilon 和 sigma 必须大于 0")


@dataclass(frozen=True)
class FormationParams:
    """编队能量参数：无向边 (i, j), i<j，及期望距离 d_ij"""
    edges: tuple
    distances: np.ndarray
    m: int
    spatial_dim: int = 3

    def __post_init__(self):
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        distances = np.asarray(self.distances, dtype=np.float64)
        if self.spatial_dim not in (2, 3):
            raise ValidationError(f"空间维度只能为 2 或 3，实际 {self.spatial_dim}")
        if len(edges) != distances.size:
            raise ValidationError(f"边数 {len(edges)} 与距离数 {distances.size} 不一致")
        if len(set(edges)) != len(edges):
            raise ValidationError("编队图存在重复边")
        for i, j in edges:
            if not (0 <= i < j < self.m):
                raise ValidationError(f"非法边 ({i}, {j})，要求 0 ≤ i < j < {self.m}")
        if np.any(distances <= 0):
            raise ValidationError("期望距离必须大于 0")
        object.__setattr__(self, 'edges', edges)
        object.__setattr__(self, 'distances', distances)


@dataclass(frozen=True)
class EnergyModel:
    """能量函数 V(y) 的描述"""
    kind: str
    params: Union[QuadraticParams, LennardJonesParams, FormationParams]
    dim: int = field(default=0)

    def __post_init__(self):
        if self.kind not in ENERGY_KINDS:
            raise ValidationError(f"未知能量类型: {self.kind}")
        if self.kind == 'quadratic':
            dim = self.params.center.size
        else:
            dim = self.params.m * self.params.spatial_dim
        object.__setattr__(self, 'dim', int(dim))

    @property
    def spatial_dim(self):
        """粒子体系的空间维度，二次能量返回 None"""
        return getattr(self.params, 'spatial_dim', None)

    @property
    def is_particle(self):
        return self.kind != 'quadratic'

    @classmethod
    def quadratic(cls, matrix, center=None):
        matrix = np.asarray(matrix, dtype=np.float64)
        if center is None:
            center = np.zeros(matrix.shape[0])
        return cls('quadratic', QuadraticParams(center=center, matrix=matrix))

    @classmethod
    def lennard_jones(cls, m, spatial_dim=3, epsilon=1.0, sigma=1.0):
        return cls('lennard_jones', LennardJonesParams(m=m, spatial_dim=spatial_dim, epsilon=epsilon, sigma=sigma))

    @classmethod
    def formation(cls, edges, distances, m, spatial_dim=3):
        return cls('formation', FormationParams(edges=edges, distances=distances, m=m, spatial_dim=spatial_dim))

    @classmethod
    def formation_from_sample(cls, y1, m, spatial_dim=3):
        """完全图编队能量，d_ij 取样本 y1 的观测成对距离（y1 恰为极小点）"""
        pos = np.asarray(y1, dtype=np.float64).reshape(m, spatial_dim)
        edges = [(i, j) for i in range(m) for j in range(i + 1, m)]
        distances = [np.linalg.norm(pos[i] - pos[j]) for i, j in edges]
        return cls.formation(edges, distances, m, spatial_dim)

    def to_dict(self):
        """转换为字典"""
        return {
            'kind': self.kind,
            'dim': self.dim,
            'spatial_dim': self.spatial_dim,
        }
