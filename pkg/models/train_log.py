# models/train_log.py
import math
from dataclasses import dataclass, field

import pandas as pd

from utils.errors import ValidationError

TRAIN_LOG_COLUMNS = ['step', 'loss', 'eval_nll', 'eval_nfe', 'min_eval_nll', 'wall_ms', 'clamp_count']


@dataclass
class TrainLog:
    """训练日志，只追加，step 单调递增"""
    rows: list = field(default_factory=list)
    min_eval_nll: float = math.inf

    def append(self, step, loss, clamp_count, wall_ms=0.0, eval_nll=math.nan, eval_nfe=math.nan):
        if self.rows and step <= self.rows[-1]['step']:
            raise ValidationError(f"step 必须单调递增: {step} <= {self.rows[-1]['step']}")
        if not math.isnan(eval_nll):
            self.min_eval_nll = min(self.min_eval_nll, eval_nll)
        self.rows.append({
            'step': int(step),
            'loss': float(loss),
            'eval_nll': float(eval_nll),
            'eval_nfe': float(eval_nfe),
            'min_eval_nll': self.min_eval_nll if math.isfinite(self.min_eval_nll) else math.nan,
            'wall_ms': float(wall_ms),
            'clamp_count': int(clamp_count),
        })

    @property
    def losses(self):
        return [r['loss'] for r in self.rows]

    def last_eval(self):
        """最近一次评估的 (nll, nfe)，没有评估时为 (nan, nan)"""
        for row in reversed(self.rows):
            if not math.isnan(row['eval_nll']):
                return row['eval_nll'], row['eval_nfe']
        return math.nan, math.nan

    def to_frame(self):
        return pd.DataFrame(self.rows, columns=TRAIN_LOG_COLUMNS)

    def to_dict(self):
        return {
            'steps': len(self.rows),
            'final_loss': self.rows[-1]['loss'] if self.rows else None,
            'min_eval_nll': self.min_eval_nll if math.isfinite(self.min_eval_nll) else None,
        }
