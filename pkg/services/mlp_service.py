# services/mlp_service.py
import numpy as np

from models.mlp_params import MlpParams
from services.transform_service import TransformService, V_Z_FLOOR
from utils.errors import ValidationError
from utils.logger import get_logger

logger = get_logger('mlp_service')


def _softplus(a):
    return np.logaddexp(0.0, a)


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


class MlpService:
    """(y, z) → (v_y, v_z) 的 MLP：前向、反向传播、前向模式方向导数"""

    @staticmethod
    def init(widths, seed):
        """权重 ~ N(0, 2/(fan_in+fan_out))，偏置为 0"""
        widths = [int(w) for w in widths]
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise ValidationError(f"非法网络宽度: {widths}")
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            std = np.sqrt(2.0 / (fan_in + fan_out))
            weights.append(rng.normal(0.0, std, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return MlpParams(weights=tuple(weights), biases=tuple(biases))

    @staticmethod
    def zero_field(dim, hidden=()):
        """v_y ≡ 0, v_z ≡ 1 的网络（恒等流）"""
        widths = [dim + 1, *hidden, dim + 1]
        weights = tuple(np.zeros((a, b)) for a, b in zip(widths[:-1], widths[1:]))
        biases = [np.zeros(w) for w in widths[1:]]
        biases[-1][-1] = 1.0
        return MlpParams(weights=weights, biases=tuple(biases))

    @staticmethod
    def stack_inputs(y, z):
        """拼接 x = [y, z]，y 为 (B, d) 或 (d,)"""
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        z = np.broadcast_to(np.asarray(z, dtype=np.float64), (y.shape[0],))
        return np.concatenate([y, z[:, None]], axis=1)

    @staticmethod
    def forward_batch(p, x, keep_cache=False):
        """批量前向，x 形状 (B, n_in)"""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != p.widths[0]:
            raise ValidationError(f"输入维度 {x.shape[1]} 与网络输入 {p.widths[0]} 不一致")
        if not np.all(np.isfinite(x)):
            raise ValidationError("网络输入包含非有限值")
        h = x
        cache = [x]
        last = len(p.weights) - 1
        for k, (w, b) in enumerate(zip(p.weights, p.biases)):
            a = h @ w + b
            if k < last:
                cache.append(a)
                h = _softplus(a)
                cache.append(h)
            else:
                h = a
        if keep_cache:
            return h, cache
        return h

    @staticmethod
    def forward(p, y, z):
        """单点前向，返回 (v_y, v_z)"""
        out = MlpService.forward_batch(p, MlpService.stack_inputs(y, z))[0]
        return out[:-1], float(out[-1])

    @staticmethod
    def backward(p, cache, d_out):
        """反向传播，返回与 p.arrays() 同序的梯度列表"""
        grads = [None] * (2 * len(p.weights))
        delta = d_out
        for k in range(len(p.weights) - 1, -1, -1):
            h_in = cache[2 * k] if k > 0 else cache[0]
            grads[2 * k] = h_in.T @ delta
            grads[2 * k + 1] = delta.sum(axis=0)
            if k > 0:
                a_prev = cache[2 * k - 1]
                delta = (delta @ p.weights[k].T) * _sigmoid(a_prev)
        return grads

    @staticmethod
    def jvp_batch(p, x, tangents):
        """前向模式方向导数，x 与 tangents 形状均为 (B, n_in)"""
        h = np.atleast_2d(np.asarray(x, dtype=np.float64))
        dh = np.atleast_2d(np.asarray(tangents, dtype=np.float64))
        last = len(p.weights) - 1
        for k, (w, b) in enumerate(zip(p.weights, p.biases)):
            a = h @ w + b
            da = dh @ w
            if k < last:
                h = _softplus(a)
                dh = _sigmoid(a) * da
            else:
                dh = da
        return dh

    @staticmethod
    def jvp(p, y, z, tangent):
        """沿 tangent（长度 dim+1）的方向导数，返回 (dv_y, dv_z)"""
        tangent = np.asarray(tangent, dtype=np.float64)
        if tangent.shape != (p.widths[0],):
            raise ValidationError(f"切向量长度 {tangent.shape} 与输入维度 {p.widths[0]} 不一致")
        out = MlpService.jvp_batch(p, MlpService.stack_inputs(y, z), tangent[None, :])[0]
        return out[:-1], float(out[-1])

    @staticmethod
    def loss_and_grad(p, y, z, target_vy, target_vz, finite=True, projectors=None, weights=None,
                      v_z_floor=V_Z_FLOOR):
        """匹配损失 mean_b w_b‖[ṽ_yθ, ṽ_zθ] − [ṽ_y, ṽ_z]‖² 及其精确梯度

        目标 (target_vy, target_vz) 为未变换的条件场；变换与模型输出共用 TransformService.apply。

        Returns:
            tuple: (loss, grads, clamp_count, per_sample_loss)
        """
        x = MlpService.stack_inputs(y, z)
        batch = x.shape[0]
        out, cache = MlpService.forward_batch(p, x, keep_cache=True)

        u_t, w_t, _ = TransformService.apply(target_vy, target_vz, finite, projectors, floor=0.0)
        u, w, tcache = TransformService.apply(out[:, :-1], out[:, -1], finite, projectors, floor=v_z_floor)

        weights = np.ones(batch) if weights is None else np.asarray(weights, dtype=np.float64)
        r_y = u - u_t
        r_z = w - w_t
        per_sample = np.sum(r_y * r_y, axis=1) + r_z * r_z
        loss = float(np.sum(weights * per_sample) / batch)

        scale = 2.0 * weights / batch
        g_vy, g_vz = TransformService.backward(tcache, scale[:, None] * r_y, scale * r_z)
        d_out = np.concatenate([g_vy, np.asarray(g_vz)[:, None]], axis=1)
        grads = MlpService.backward(p, cache, d_out)
        return loss, grads, int(np.count_nonzero(tcache['clamped'])), per_sample

    @staticmethod
    def fd_gradient(p, y, z, target_vy, target_vz, index, h=1e-6, **kwargs):
        """对 p.arrays() 中指定 (数组序号, 扁平下标) 的参数做中心差分"""
        arr_idx, flat_idx = index
        arrays = [a.copy() for a in p.arrays()]
        base = arrays[arr_idx].reshape(-1)[flat_idx]
        losses = []
        for sign in (1.0, -1.0):
            arrays[arr_idx].reshape(-1)[flat_idx] = base + sign * h
            loss, _, _, _ = MlpService.loss_and_grad(MlpParams.from_arrays(arrays), y, z, target_vy,
                                                     target_vz, **kwargs)
            losses.append(loss)
        return (losses[0] - losses[1]) / (2.0 * h)


class MlpField:
    """把 MlpParams 包装成向量场接口（evaluate / jvp）"""

    def __init__(self, params):
        self.params = params

    @property
    def dim(self):
        return self.params.dim

    def evaluate(self, x):
        return MlpService.forward_batch(self.params, x)

    def jvp(self, x, tangents):
        return MlpService.jvp_batch(self.params, x, tangents)
