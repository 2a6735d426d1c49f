# repositories/dataset_repository.py
import os
import struct

import numpy as np
import pandas as pd

from models.dataset import DATASET_KINDS, Dataset
from utils.errors import FormatError, ValidationError
from utils.logger import get_logger

logger = get_logger('dataset_repository')

MAGIC = b'HIFMDATA'
VERSION = 1
_HEADER = struct.Struct('<IQQBII')


class DatasetRepository:
    """数据集文件仓储层：二进制 HIFMDATA 与 CSV 两种格式"""

    @staticmethod
    def infer_format(path):
        return 'csv' if path.lower().endswith('.csv') else 'binary'

    @staticmethod
    def _ensure_dir(path):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)

    @staticmethod
    def store(ds, path, fmt=None):
        fmt = fmt or DatasetRepository.infer_format(path)
        DatasetRepository._ensure_dir(path)
        if fmt == 'binary':
            kind = DATASET_KINDS.index(ds.kind)
            with open(path, 'wb') as f:
                f.write(MAGIC + _HEADER.pack(VERSION, ds.n, ds.dim, kind, ds.m, ds.spatial_dim))
                f.write(np.ascontiguousarray(ds.samples, dtype='<f8').tobytes())
        elif fmt == 'csv':
            columns = [f"x{k}" for k in range(ds.dim)]
            pd.DataFrame(ds.samples, columns=columns).to_csv(path, index=False, float_format='%.17g')
        else:
            raise ValidationError(f"未知数据集格式: {fmt}")
        logger.info(f"数据集已保存: {path} ({fmt}), n={ds.n}, dim={ds.dim}")

    @staticmethod
    def load(path, fmt=None, kind='generic', m=0, spatial_dim=0, name=None):
        """读取数据集；CSV 不含元信息，由参数给出"""
        fmt = fmt or DatasetRepository.infer_format(path)
        name = name if name is not None else os.path.splitext(os.path.basename(path))[0]
        if fmt == 'binary':
            ds = DatasetRepository._load_binary(path, name)
        elif fmt == 'csv':
            samples = DatasetRepository._load_csv(path)
            ds = Dataset(samples=samples, kind=kind, m=m, spatial_dim=spatial_dim, name=name)
        else:
            raise ValidationError(f"未知数据集格式: {fmt}")
        logger.info(f"数据集已加载: {path} ({fmt}), n={ds.n}, dim={ds.dim}")
        return ds

    @staticmethod
    def _load_binary(path, name):
        try:
            with open(path, 'rb') as f:
                buf = f.read()
        except OSError as e:
            raise FormatError(f"无法读取数据集文件 {path}: {e}") from e
        if buf[:len(MAGIC)] != MAGIC:
            raise FormatError(f"数据集文件 magic 不匹配: {buf[:len(MAGIC)]!r}，期望 {MAGIC!r}")
        offset = len(MAGIC)
        if len(buf) < offset + _HEADER.size:
            raise FormatError("数据集文件头被截断")
        version, n, dim, kind, m, spatial_dim = _HEADER.unpack_from(buf, offset)
        if version != VERSION:
            raise FormatError(f"数据集文件版本 {version} 不受支持，当前版本 {VERSION}")
        if kind >= len(DATASET_KINDS):
            raise FormatError(f"未知数据集类型编码 {kind}")
        offset += _HEADER.size
        expected = 8 * n * dim
        if len(buf) - offset != expected:
            raise FormatError(f"数据区长度 {len(buf) - offset} 字节，期望 {expected} 字节（n={n}, dim={dim}）")
        samples = np.frombuffer(buf, dtype='<f8', offset=offset).reshape(n, dim).astype(np.float64)
        try:
            return Dataset(samples=samples, kind=DATASET_KINDS[kind], m=m, spatial_dim=spatial_dim, name=name)
        except ValidationError as e:
            raise FormatError(f"数据集文件内容非法: {e}") from e

    @staticmethod
    def _load_csv(path):
        try:
            df = pd.read_csv(path, dtype=str, keep_default_na=False)
        except pd.errors.ParserError as e:
            raise FormatError(f"CSV 行长度不一致: {e}") from e
        except (OSError, pd.errors.EmptyDataError) as e:
            raise FormatError(f"无法读取 CSV 文件 {path}: {e}") from e

        expected = [f"x{k}" for k in range(df.shape[1])]
        if list(df.columns) != expected:
            raise FormatError(f"CSV 表头应为 {','.join(expected)}，实际 {','.join(df.columns)}")

        samples = np.empty(df.shape, dtype=np.float64)
        for j, column in enumerate(df.columns):
            values = pd.to_numeric(df[column], errors='coerce')
            bad = np.flatnonzero(values.isna().to_numpy())
            if bad.size:
                i = int(bad[0])
                cell = df[column].iloc[i]
                reason = '缺少字段' if not isinstance(cell, str) or cell == '' else f"非数值 {cell!r}"
                raise FormatError(f"CSV 第 {i + 2} 行（数据行 {i}）列 {column}: {reason}")
            samples[:, j] = values.to_numpy(dtype=np.float64)
        return samples
