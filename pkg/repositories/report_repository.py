# repositories/report_repository.py
import os

import numpy as np
import pandas as pd

from utils.logger import get_logger

logger = get_logger('report_repository')

SPECTRUM_COLUMNS = ['index', 'alpha_raw', 'alpha_processed', 'is_null']
COMPARE_COLUMNS = ['method', 'kappa', 'hyperbolize', 'project', 'mean_nll', 'min_eval_nll', 'mean_nfe',
                   'final_loss']
CHECK_COLUMNS = ['name', 'status', 'value', 'tolerance']
FLOAT_FORMAT = '%.17g'


class ReportRepository:
    """CSV 结果与配置回显的写入"""

    @staticmethod
    def _write_frame(df, path):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        logger.info(f"已写入 {path}, {len(df)} 行")

    @staticmethod
    def write_train_log(log, path):
        ReportRepository._write_frame(log.to_frame(), path)

    @staticmethod
    def read_train_log(path):
        return pd.read_csv(path)

    @staticmethod
    def write_nll(report, path):
        ReportRepository._write_frame(report.to_frame(), path)

    @staticmethod
    def write_spectrum(raw, processed, path):
        """raw 为 analyze 的原始谱，processed 为构造路径后的谱，特征向量顺序一致"""
        df = pd.DataFrame({
            'index': np.arange(raw.dim),
            'alpha_raw': raw.alphas,
            'alpha_processed': processed.alphas,
            'is_null': raw.null_mask.astype(int),
        }, columns=SPECTRUM_COLUMNS)
        ReportRepository._write_frame(df, path)

    @staticmethod
    def write_samples(samples, path):
        samples = np.atleast_2d(samples)
        columns = [f"x{k}" for k in range(samples.shape[1])]
        ReportRepository._write_frame(pd.DataFrame(samples, columns=columns), path)

    @staticmethod
    def write_compare(rows, path):
        ReportRepository._write_frame(pd.DataFrame(rows, columns=COMPARE_COLUMNS), path)

    @staticmethod
    def write_check(results, path):
        ReportRepository._write_frame(pd.DataFrame(results, columns=CHECK_COLUMNS), path)

    @staticmethod
    def write_config(values, path):
        """key=value 回显，按键排序，跳过未设置的项"""
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        lines = [f"{key}={values[key]}" for key in sorted(values) if values[key] is not None]
        with open(path, 'w', encoding='utf-8') as f:
            f.write('\n'.join(lines) + '\n')
        logger.info(f"配置已回显到 {path}")
