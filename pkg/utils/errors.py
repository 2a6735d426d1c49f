#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
异常定义模块
"""


class HifmError(Exception):
    """所有业务异常的基类"""


class ValidationError(HifmError):
    """输入参数或前置条件不满足"""


class NumericalError(HifmError):
    """数值异常：非有限值、不收敛、奇异协方差"""


class NotAMinimumError(NumericalError):
    """Hessian 存在超出容差的负特征值"""


class DomainError(HifmError):
    """能量函数在定义域之外求值（例如粒子重合）"""


class FormatError(HifmError):
    """模型、数据集或配置文件格式错误"""


class IntegrationError(NumericalError):
    """RK45 积分失败

    Attributes:
        state: 最后一个被接受的状态
        z: 最后一个被接受的积分变量
        nfe: 已消耗的场函数调用次数
    """

    def __init__(self, message, state=None, z=None, nfe=0):
        super().__init__(message)
        self.state = state
        self.z = z
        self.nfe = nfe


class TrainingAbort(NumericalError):
    """训练中出现非有限损失，diagnostics 保存定位信息"""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
