#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
运行配置模块：key=value 配置文件 + 命令行覆盖
"""

import os
from typing import Literal, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic import ValidationError as PydanticValidationError

from models.train_config import TRAIN_METHODS, LangevinConfig, Rk45Config, TrainConfig
from utils.errors import FormatError, ValidationError

ENERGY_CHOICES = ('quadratic', 'lj', 'formation')


def default_threads():
    return int(os.getenv('HIFM_THREADS', '1'))


def default_output_dir():
    return os.getenv('HIFM_OUTPUT_DIR', 'runs')


def _parse_tuple(value, cast):
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(',') if p.strip()]
        return tuple(cast(p) for p in parts)
    return tuple(cast(v) for v in value)


class RunConfig(BaseModel):
    """一次运行的全部参数（训练、积分、数据生成与路径），未知键直接拒绝"""
    model_config = ConfigDict(extra='forbid', frozen=True)

    # 能量与数据
    energy: Literal[ENERGY_CHOICES] = 'quadratic'
    quad_eigvals: tuple[float, ...] = (1.0, 25.0)
    m: int = Field(0, ge=0)
    spatial_dim: int = Field(3, ge=2, le=3)
    lj_epsilon: float = Field(1.0, gt=0)
    lj_sigma: float = Field(1.0, gt=0)
    data: Optional[str] = None
    eval_data: Optional[str] = None
    eval_frac: float = Field(0.0, ge=0, lt=1)
    out_dir: Optional[str] = None
    model: Optional[str] = None
    threads: int = Field(default_factory=default_threads, ge=1)

    # 训练
    method: Literal[TRAIN_METHODS] = 'hessian_quadratic'
    finite: bool = True
    project: bool = False
    hyperbolize: bool = False
    isotropize: bool = False
    c: float = 2.0
    gamma: float = 1e-10
    kappa: float = 1.0
    sigma_min: float = 1e-5
    eps: float = 1e-2
    batch_size: int = 256
    steps: int = 1000
    seed: int = 0
    z_max: float = 1.0 - 1e-4
    lr: float = 1e-4
    weight_decay: float = 0.01
    hidden: tuple[int, ...] = (64, 64)
    eval_every: int = 0
    log_every: int = 100
    sample_y0: bool = False
    v_z_floor: float = 1e-3
    record_wall_time: bool = False

    # RK45
    rtol: float = 1e-2
    atol: float = 1e-2
    initial_step: Optional[float] = None
    max_steps: int = 100000
    safety: float = 0.9

    # Langevin
    eta: float = 1e-3
    tau: float = 0.1
    burn_in: int = 1000
    thin: int = 10
    n: int = 1000
    refine_steps: int = 0
    n_chains: int = 1

    @field_validator('quad_eigvals', mode='before')
    @classmethod
    def _split_floats(cls, value):
        return _parse_tuple(value, float)

    @field_validator('hidden', mode='before')
    @classmethod
    def _split_ints(cls, value):
        return _parse_tuple(value, int)

    @model_validator(mode='after')
    def _check_sections(self):
        # 子配置各自的约束在这里一并检查
        self.train_config()
        self.rk45_config()
        self.langevin_config()
        return self

    def _section(self, model_cls):
        return model_cls(**{name: getattr(self, name) for name in model_cls.model_fields})

    def train_config(self):
        return self._section(TrainConfig)

    def rk45_config(self):
        return self._section(Rk45Config)

    def langevin_config(self):
        return self._section(LangevinConfig)

    def echo_values(self):
        """可回读的 key=value 字符串字典"""
        out = {}
        for name, value in self.model_dump().items():
            if value is None:
                continue
            if isinstance(value, bool):
                out[name] = 'true' if value else 'false'
            elif isinstance(value, tuple):
                out[name] = ','.join(repr(v) for v in value)
            else:
                out[name] = repr(value) if isinstance(value, float) else str(value)
        return out


def _describe(error):
    parts = []
    for item in error.errors():
        loc = '.'.join(str(p) for p in item['loc']) or '<config>'
        parts.append(f"{loc}: {item['msg']}")
    return '; '.join(parts)


def load_run_config(path=None, overrides=None):
    """读取配置文件并应用命令行覆盖（值为 None 的覆盖项忽略）"""
    values = {}
    if path:
        if not os.path.exists(path):
            raise FormatError(f"配置文件不存在: {path}")
        values.update({k: v for k, v in dotenv_values(path).items() if v not in (None, '')})
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return RunConfig(**values)
    except PydanticValidationError as e:
        message = _describe(e)
        if path:
            raise FormatError(f"配置文件 {path} 无效: {message}") from e
        raise ValidationError(f"配置无效: {message}") from e
