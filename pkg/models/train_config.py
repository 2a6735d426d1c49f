# models/train_config.py
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.flow_spec import FlowFlags

TRAIN_METHODS = (
    'hessian_formation',
    'hessian_quadratic',
    'isotropic_data',
    'isotropic_interpolant',
    'optimal_transport',
)


class Rk45Config(BaseModel):
    """RK45 积分参数"""
    model_config = ConfigDict(extra='forbid', frozen=True)

    rtol: float = Field(1e-2, gt=0)
    atol: float = Field(1e-2, gt=0)
    initial_step: Optional[float] = Field(None, gt=0)
    max_steps: int = Field(100000, ge=1)
    safety: float = Field(0.9, gt=0, le=1)


class LangevinConfig(BaseModel):
    """过阻尼 Langevin 数据生成参数"""
    model_config = ConfigDict(extra='forbid', frozen=True)

    eta: float = Field(1e-3, gt=0)
    tau: float = Field(0.1, ge=0)
    burn_in: int = Field(1000, ge=0)
    thin: int = Field(10, ge=1)
    n: int = Field(1000, ge=0)
    seed: int = 0
    refine_steps: int = Field(0, ge=0)
    n_chains: int = Field(1, ge=1)


class TrainConfig(BaseModel):
    """训练配置"""
    model_config = ConfigDict(extra='forbid', frozen=True)

    method: Literal[TRAIN_METHODS] = 'hessian_quadratic'
    finite: bool = True
    project: bool = False
    hyperbolize: bool = False
    isotropize: bool = False
    c: float = Field(2.0, ge=1)
    gamma: float = Field(1e-10, gt=0)
    kappa: float = Field(1.0, gt=0)
    sigma_min: float = Field(1e-5, gt=0)
    eps: float = Field(1e-2, gt=0)
    batch_size: int = Field(256, ge=1)
    steps: int = Field(1000, ge=0)
    seed: int = 0
    z_max: float = Field(1.0 - 1e-4, gt=0, lt=1)
    lr: float = Field(1e-4, gt=0)
    weight_decay: float = Field(0.01, ge=0)
    hidden: tuple[int, ...] = (64, 64)
    eval_every: int = Field(0, ge=0)
    log_every: int = Field(100, ge=1)
    sample_y0: bool = False
    v_z_floor: float = Field(1e-3, gt=0)
    # 关闭时 wall_ms 列恒为 0，训练日志可逐字节复现
    record_wall_time: bool = False

    @model_validator(mode='after')
    def _check_hidden(self):
        if any(int(h) < 1 for h in self.hidden):
            raise ValueError(f"隐藏层宽度必须为正整数: {self.hidden}")
        return self

    @property
    def flags(self):
        return FlowFlags(finite=self.finite, project=self.project, hyperbolize=self.hyperbolize,
                         isotropize=self.isotropize)
