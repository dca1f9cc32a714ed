"""
张量基础模块
确定性的矩阵运算、可复现的高斯采样与批统计量
"""

from .matrix import Matrix, as_matrix, has_nonfinite, identity, matmul, transpose
from .rng import ALGORITHM, RngStream, gaussian
from .stats import column_stats, matched_abs_corr, pairwise_abs_corr, pooled_variance

__all__ = [
    'Matrix',
    'as_matrix',
    'has_nonfinite',
    'identity',
    'matmul',
    'transpose',
    'ALGORITHM',
    'RngStream',
    'gaussian',
    'column_stats',
    'matched_abs_corr',
    'pairwise_abs_corr',
    'pooled_variance',
]
