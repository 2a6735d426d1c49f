# services/transform_service.py
import numpy as np

V_Z_FLOOR = 1e-3


class TransformService:
    """有限变换与双曲投影：目标场和模型输出共用同一实现"""

    @staticmethod
    def clamp_v_z(v_z, floor):
        """|v_z| 下限截断，保持符号（0 视为正），返回 (截断值, 截断掩码)"""
        v_z = np.asarray(v_z, dtype=np.float64)
        clamped = np.abs(v_z) < floor
        sign = np.where(v_z < 0, -1.0, 1.0)
        return np.where(clamped, sign * floor, v_z), clamped

    @staticmethod
    def apply(v_y, v_z, finite, projectors=None, floor=0.0):
        """批量模式变换

        Args:
            v_y: (B, d) 场的 y 分量
            v_z: (B,) 场的 z 分量
            finite: True 时 v_y ← v_y / v_z, v_z ← 1
            projectors: None 或 (B, d, d) 的 Π_hyp
            floor: |v_z| 下限

        Returns:
            tuple: (ṽ_y, ṽ_z, cache)，cache 供 backward 使用
        """
        v_y = np.atleast_2d(np.asarray(v_y, dtype=np.float64))
        v_z = np.atleast_1d(np.asarray(v_z, dtype=np.float64))
        cache = {'v_y': v_y, 'finite': finite, 'projectors': projectors}
        if finite:
            v_zc, clamped = TransformService.clamp_v_z(v_z, floor)
            u = v_y / v_zc[:, None]
            w_z = np.ones_like(v_z)
            cache.update(v_zc=v_zc, clamped=clamped)
        else:
            u = v_y
            w_z = v_z
            cache.update(clamped=np.zeros(v_z.shape, dtype=bool))
        if projectors is not None:
            u = np.einsum('bij,bj->bi', projectors, u)
        return u, w_z, cache

    @staticmethod
    def backward(cache, g_u, g_wz):
        """变换的向量-雅可比积，返回对原始 (v_y, v_z) 的梯度"""
        if cache['projectors'] is not None:
            # Π 对称
            g_u = np.einsum('bij,bj->bi', cache['projectors'], g_u)
        if not cache['finite']:
            return g_u, g_wz
        v_zc = cache['v_zc']
        g_vy = g_u / v_zc[:, None]
        g_vz = -np.sum(g_u * cache['v_y'], axis=1) / (v_zc * v_zc)
        g_vz = np.where(cache['clamped'], 0.0, g_vz)
        return g_vy, g_vz
