# models/__init__.py
from .dataset import Dataset
from .eigen_pair import EigenPair
from .energy_model import EnergyModel
from .flow_spec import FlowFlags, FlowSpec, OtSpec
from .gaussian_state import GaussianState, PathPoint
from .mlp_params import AdamWState, MlpParams
from .nll_report import NLLReport
from .spectrum import Spectrum
from .train_config import LangevinConfig, Rk45Config, TrainConfig
from .train_log import TrainLog

__all__ = [
    'Dataset',
    'EigenPair',
    'EnergyModel',
    'FlowFlags',
    'FlowSpec',
    'OtSpec',
    'GaussianState',
    'PathPoint',
    'AdamWState',
    'MlpParams',
    'NLLReport',
    'Spectrum',
    'LangevinConfig',
    'Rk45Config',
    'TrainConfig',
    'TrainLog',
]
