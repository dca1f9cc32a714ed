from .config_manager import ConfigManager
from .logging_setup import setup_logging
from .run_config import (
    DatasetSpec,
    HessianSettings,
    ProbeSettings,
    RunConfig,
    TrainSettings,
    load_run_config,
)

__all__ = [
    'ConfigManager',
    'setup_logging',
    'DatasetSpec',
    'HessianSettings',
    'ProbeSettings',
    'RunConfig',
    'TrainSettings',
    'load_run_config',
]
