# repositories/__init__.py
from .dataset_repository import DatasetRepository
from .model_repository import ModelRepository
from .report_repository import ReportRepository

__all__ = [
    'DatasetRepository',
    'ModelRepository',
    'ReportRepository',
]
