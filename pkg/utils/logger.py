#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
日志工具模块

所有模块日志器都挂在 hifm 命名空间下，级别由 HIFM_LOG_LEVEL 控制，
第三方库的日志保持 WARNING。
"""

import logging
import os
import sys
from datetime import datetime

ROOT_NAME = 'hifm'
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

# 全局标志，确保只初始化一次
_logger_initialized = False


def _env_level():
    return getattr(logging, os.getenv('HIFM_LOG_LEVEL', 'INFO').upper(), logging.INFO)


def setup_logger(name=ROOT_NAME, level=None):
    """设置日志配置：按日期的文件 handler（HIFM_LOG_DIR 为空则不写文件）+ stderr 控制台"""
    global _logger_initialized

    if _logger_initialized:
        return logging.getLogger(name)

    level = _env_level() if level is None else level
    logging.getLogger(ROOT_NAME).setLevel(level)

    root_logger = logging.getLogger()
    if root_logger.level == logging.NOTSET or root_logger.level > logging.WARNING:
        root_logger.setLevel(logging.WARNING)

    # 已有 handler（例如 pytest 的日志捕获）时不再重复添加
    if root_logger.handlers:
        _logger_initialized = True
        return logging.getLogger(name)

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)
    handlers = []

    log_dir = os.getenv('HIFM_LOG_DIR', 'logs')
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        log_file = os.path.join(log_dir, f"{ROOT_NAME}_{datetime.now().strftime('%Y%m%d')}.log")
        handlers.append(logging.FileHandler(log_file, encoding='utf-8'))

    # stdout 只留给命令结果
    handlers.append(logging.StreamHandler(sys.stderr))

    for handler in handlers:
        handler.setLevel(logging.NOTSET)
        handler.setFormatter(formatter)
        root_logger.addHandler(handler)

    _logger_initialized = True
    return logging.getLogger(name)


def get_logger(name=None):
    """获取 hifm.<name> 日志器"""
    if not name or name == ROOT_NAME:
        return logging.getLogger(ROOT_NAME)
    return logging.getLogger(f"{ROOT_NAME}.{name}")
