# models/nll_report.py
from dataclasses import dataclass

import numpy as np
import pandas as pd

NLL_COLUMNS = ['sample_index', 'nll', 'nfe', 'accepted', 'rejected', 'status']


@dataclass
class NLLReport:
    """逐样本负对数似然 nll = −(prior_term + div_term)"""
    nll: np.ndarray
    nfe: np.ndarray
    accepted: np.ndarray
    rejected: np.ndarray
    prior_term: np.ndarray
    div_term: np.ndarray
    status: list

    @property
    def ok(self):
        return np.array([s == 'ok' for s in self.status], dtype=bool)

    @property
    def mean_nll(self):
        ok = self.ok
        return float(np.mean(self.nll[ok])) if ok.any() else float('nan')

    @property
    def mean_nfe(self):
        ok = self.ok
        return float(np.mean(self.nfe[ok])) if ok.any() else float('nan')

    def to_frame(self):
        return pd.DataFrame({
            'sample_index': np.arange(len(self.status)),
            'nll': self.nll,
            'nfe': self.nfe,
            'accepted': self.accepted,
            'rejected': self.rejected,
            'status': self.status,
        }, columns=NLL_COLUMNS)

    def to_dict(self):
        return {
            'n': len(self.status),
            'failed': int(np.count_nonzero(~self.ok)),
            'mean_nll': self.mean_nll,
            'mean_nfe': self.mean_nfe,
        }
