# models/mlp_params.py
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MlpParams:
    """MLP 参数：weights[k] 形状 (n_in, n_out)，biases[k] 形状 (n_out,)

    隐藏层 softplus，输出层恒等；最后一个输出坐标是 v_z。
    """
    weights: tuple
    biases: tuple

    @property
    def widths(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def dim(self):
        """数据维度（输入去掉 z 的那一维）"""
        return self.widths[0] - 1

    def arrays(self):
        """按 [W0, b0, W1, b1, ...] 顺序展开"""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    @classmethod
    def from_arrays(cls, arrays):
        return cls(weights=tuple(arrays[0::2]), biases=tuple(arrays[1::2]))

    def to_dict(self):
        """转换为字典"""
        return {
            'widths': self.widths,
            'n_params': int(sum(a.size for a in self.arrays())),
        }


@dataclass
class AdamWState:
    """AdamW 优化器状态"""
    m: list
    v: list
    step: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01

    @classmethod
    def for_params(cls, params, **hyper):
        arrays = params.arrays()
        return cls(m=[np.zeros_like(a) for a in arrays], v=[np.zeros_like(a) for a in arrays], **hyper)

    def to_dict(self):
        return {
            'step': self.step,
            'lr': self.lr,
            'betas': (self.beta1, self.beta2),
            'eps': self.eps,
            'weight_decay': self.weight_decay,
        }
