# repositories/model_repository.py
import os
import struct

import numpy as np

from models.mlp_params import MlpParams
from utils.errors import FormatError
from utils.logger import get_logger

logger = get_logger('model_repository')

MAGIC = b'HIFM-MLP'
VERSION = 1


class ModelRepository:
    """MLP 参数文件仓储层

    格式：magic "HIFM-MLP"，u32 版本，u32 层数，逐层 u32 行数/列数，
    再逐层写入权重（行优先）与偏置，均为小端 f64。
    """

    @staticmethod
    def save(params, path):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        header = MAGIC + struct.pack('<II', VERSION, len(params.weights))
        for w in params.weights:
            header += struct.pack('<II', *w.shape)
        with open(path, 'wb') as f:
            f.write(header)
            for w, b in zip(params.weights, params.biases):
                f.write(np.ascontiguousarray(w, dtype='<f8').tobytes())
                f.write(np.ascontiguousarray(b, dtype='<f8').tobytes())
        logger.info(f"模型已保存: {path}, 宽度 {params.widths}")

    @staticmethod
    def _take(buf, offset, size, what):
        if offset + size > len(buf):
            raise FormatError(f"模型文件被截断：读取{what}时需要 {size} 字节，剩余 {len(buf) - offset} 字节")
        return buf[offset:offset + size], offset + size

    @staticmethod
    def load(path):
        try:
            with open(path, 'rb') as f:
                buf = f.read()
        except OSError as e:
            raise FormatError(f"无法读取模型文件 {path}: {e}") from e

        magic, offset = ModelRepository._take(buf, 0, len(MAGIC), '文件头')
        if magic != MAGIC:
            raise FormatError(f"模型文件 magic 不匹配: {magic!r}，期望 {MAGIC!r}")
        raw, offset = ModelRepository._take(buf, offset, 8, '版本与层数')
        version, n_layers = struct.unpack('<II', raw)
        if version != VERSION:
            raise FormatError(f"模型文件版本 {version} 不受支持，当前版本 {VERSION}")
        if n_layers < 1:
            raise FormatError("模型文件层数为 0")

        shapes = []
        for _ in range(n_layers):
            raw, offset = ModelRepository._take(buf, offset, 8, '层形状')
            shapes.append(struct.unpack('<II', raw))
        for (_, cols), (rows, _) in zip(shapes[:-1], shapes[1:]):
            if cols != rows:
                raise FormatError(f"相邻层形状不一致: {cols} ≠ {rows}")

        weights, biases = [], []
        for rows, cols in shapes:
            raw, offset = ModelRepository._take(buf, offset, 8 * rows * cols, '权重')
            weights.append(np.frombuffer(raw, dtype='<f8').reshape(rows, cols).astype(np.float64))
            raw, offset = ModelRepository._take(buf, offset, 8 * cols, '偏置')
            biases.append(np.frombuffer(raw, dtype='<f8').astype(np.float64))
        if offset != len(buf):
            raise FormatError(f"模型文件末尾多出 {len(buf) - offset} 字节")

        params = MlpParams(weights=tuple(weights), biases=tuple(biases))
        logger.info(f"模型已加载: {path}, 宽度 {params.widths}")
        return params
