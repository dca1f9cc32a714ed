"""
解析模块
整流高斯矩、梯度爆炸率界及其极限
"""

from .moments import (
    GaussianSpec,
    ReluMoments,
    activation_gain,
    gaussian_spec_from_bn,
    relu_moments,
)
from .bounds import (
    ExplosionBound,
    correlated_rate_zero_centered,
    divergence_probability,
    explosion_bound,
    explosion_rate_excess,
    explosion_rate_lower,
    explosion_table,
    upper_bound_factor,
)

__all__ = [
    'GaussianSpec',
    'ReluMoments',
    'activation_gain',
    'gaussian_spec_from_bn',
    'relu_moments',
    'ExplosionBound',
    'correlated_rate_zero_centered',
    'divergence_probability',
    'explosion_bound',
    'explosion_rate_excess',
    'explosion_rate_lower',
    'explosion_table',
    'upper_bound_factor',
]
