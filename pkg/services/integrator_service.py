# services/integrator_service.py
import numpy as np

from models.train_config import Rk45Config
from utils.errors import IntegrationError, ValidationError
from utils.logger import get_logger

logger = get_logger('integrator_service')

# Dormand–Prince 5(4) 系数
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# 五阶与嵌入四阶解之差，作用于 7 个阶段（含 FSAL 的末阶段）
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])

STAGES_PER_STEP = 6
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


class IntegratorService:
    """自适应 Dormand–Prince RK45

    FSAL：每次尝试步（无论接受与否）消耗 6 次场函数调用，
    外加起点 1 次，故 nfe = 6·(accepted + rejected) + 1。
    """

    @staticmethod
    def _error_norm(err, x_old, x_new, cfg):
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(x_old), np.abs(x_new))
        return float(np.sqrt(np.mean((err / scale) ** 2)))

    @staticmethod
    def _initial_step(x0, f0, span, cfg):
        if cfg.initial_step is not None:
            return min(cfg.initial_step, span)
        scale = cfg.atol + cfg.rtol * np.abs(x0)
        d0 = float(np.sqrt(np.mean((x0 / scale) ** 2)))
        d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
        if d1 == 0.0:
            return span
        if d0 < 1e-5:
            return min(1e-6, span)
        return min(0.01 * d0 / d1, span)

    @staticmethod
    def rk45(field, x0, span, cfg=None):
        """从 span[0] 积分到 span[1]（任一方向）

        Args:
            field: f(s, x) -> dx/ds
            x0: 初值
            span: (a, b)，a ≠ b
            cfg: Rk45Config

        Returns:
            tuple: (x_end, nfe, diagnostics)
        """
        cfg = cfg or Rk45Config()
        a, b = float(span[0]), float(span[1])
        if a == b:
            raise ValidationError("积分区间端点不能相同")
        direction = 1.0 if b > a else -1.0
        length = abs(b - a)

        x = np.array(x0, dtype=np.float64)
        s = a
        f = np.asarray(field(s, x), dtype=np.float64)
        nfe = 1
        if not np.all(np.isfinite(f)):
            raise IntegrationError(f"起点 s={s} 处导数非有限", state=x, z=s, nfe=nfe)

        h = IntegratorService._initial_step(x, f, length, cfg)
        accepted = rejected = 0
        k = np.empty((7, x.size))

        while direction * (b - s) > 0:
            if accepted + rejected >= cfg.max_steps:
                raise IntegrationError(f"超过最大步数 {cfg.max_steps}", state=x, z=s, nfe=nfe)
            remaining = abs(b - s)
            step = min(h, remaining)
            hs = direction * step

            k[0] = f
            for i in range(1, 6):
                dx = hs * (_A[i] @ k[:i])
                k[i] = field(s + _C[i] * hs, x + dx)
            x_new = x + hs * (_B @ k[:6])
            s_new = b if step == remaining else s + hs
            f_new = np.asarray(field(s_new, x_new), dtype=np.float64)
            k[6] = f_new
            nfe += STAGES_PER_STEP

            if not (np.all(np.isfinite(k)) and np.all(np.isfinite(x_new))):
                raise IntegrationError(f"s={s:.6g} 附近导数非有限", state=x, z=s, nfe=nfe)

            err = IntegratorService._error_norm(hs * (_E @ k), x, x_new, cfg)
            if err <= 1.0:
                factor = MAX_FACTOR if err == 0.0 else min(MAX_FACTOR, cfg.safety * err ** -0.2)
                accepted += 1
                x, s, f = x_new, s_new, f_new
                h = step * max(MIN_FACTOR, factor)
            else:
                rejected += 1
                h = step * max(MIN_FACTOR, cfg.safety * err ** -0.2)

        diagnostics = {'accepted': accepted, 'rejected': rejected, 'nfe': nfe}
        return x, nfe, diagnostics
