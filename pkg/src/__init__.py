"""
gradflow - BN+ReLU 网络梯度爆炸的解析界、带轨迹的全连接引擎与大批量逐层自适应优化器
"""

__version__ = '0.1.0'

from .config import ConfigManager, RunConfig, load_run_config
from .errors import (
    ConfigError,
    DegenerateInputError,
    DomainError,
    FormatError,
    GradflowError,
    PreconditionError,
    ShapeError,
)

__all__ = [
    'ConfigManager',
    'RunConfig',
    'load_run_config',
    'ConfigError',
    'DegenerateInputError',
    'DomainError',
    'FormatError',
    'GradflowError',
    'PreconditionError',
    'ShapeError',
]
