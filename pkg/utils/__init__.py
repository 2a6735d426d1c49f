#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
工具模块
"""

from .logger import get_logger, setup_logger
from .errors import (
    HifmError,
    ValidationError,
    NumericalError,
    NotAMinimumError,
    DomainError,
    FormatError,
    IntegrationError,
    TrainingAbort,
)

__all__ = [
    'get_logger',
    'setup_logger',
    'HifmError',
    'ValidationError',
    'NumericalError',
    'NotAMinimumError',
    'DomainError',
    'FormatError',
    'IntegrationError',
    'TrainingAbort',
]
