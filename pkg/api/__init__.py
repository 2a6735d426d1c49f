# api/__init__.py
from . import check_commands, data_commands, likelihood_commands, spectrum_commands, train_commands

COMMAND_MODULES = [data_commands, spectrum_commands, train_commands, likelihood_commands, check_commands]

__all__ = ['COMMAND_MODULES']
