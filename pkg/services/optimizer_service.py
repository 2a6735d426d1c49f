# services/optimizer_service.py
import numpy as np

from models.mlp_params import AdamWState, MlpParams
from utils.errors import ValidationError


class OptimizerService:
    """AdamW（解耦权重衰减）"""

    @staticmethod
    def init(params, lr=1e-4, weight_decay=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        return AdamWState.for_params(params, lr=lr, weight_decay=weight_decay, beta1=beta1,
                                     beta2=beta2, eps=eps)

    @staticmethod
    def adamw_step(state, p, grads):
        """一步 AdamW 更新，返回新的 (state, params)，不修改输入"""
        arrays = p.arrays()
        if len(grads) != len(arrays) or any(g.shape != a.shape for g, a in zip(grads, arrays)):
            raise ValidationError("梯度形状与参数不一致")

        step = state.step + 1
        bias_correction1 = 1.0 - state.beta1 ** step
        bias_correction2 = 1.0 - state.beta2 ** step
        step_size = state.lr / bias_correction1

        new_m, new_v, new_arrays = [], [], []
        for a, g, m, v in zip(arrays, grads, state.m, state.v):
            m = state.beta1 * m + (1.0 - state.beta1) * g
            v = state.beta2 * v + (1.0 - state.beta2) * g * g
            # 解耦权重衰减，直接作用在参数上
            a = a - state.lr * state.weight_decay * a
            denom = np.sqrt(v / bias_correction2) + state.eps
            a = a - step_size * m / denom
            new_m.append(m)
            new_v.append(v)
            new_arrays.append(a)

        new_state = AdamWState(m=new_m, v=new_v, step=step, lr=state.lr, beta1=state.beta1,
                               beta2=state.beta2, eps=state.eps, weight_decay=state.weight_decay)
        return new_state, MlpParams.from_arrays(new_arrays)
