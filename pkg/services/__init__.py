# services/__init__.py
from .linalg_service import LinalgService
from .energy_service import EnergyService
from .spectrum_service import SpectrumService
from .flow_service import FlowService, ConditionalFieldModel
from .transform_service import TransformService
from .mlp_service import MlpService, MlpField
from .optimizer_service import OptimizerService
from .integrator_service import IntegratorService
from .likelihood_service import LikelihoodService
from .train_service import TrainService
from .data_service import DataService
from .check_service import CheckService

__all__ = [
    'LinalgService',
    'EnergyService',
    'SpectrumService',
    'FlowService',
    'ConditionalFieldModel',
    'TransformService',
    'MlpService',
    'MlpField',
    'OptimizerService',
    'IntegratorService',
    'LikelihoodService',
    'TrainService',
    'DataService',
    'CheckService',
]
