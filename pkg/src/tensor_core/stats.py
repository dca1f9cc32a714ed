"""
批统计量：列均值/总体方差、相关系数
"""

from typing import Tuple

import numpy as np

from ..errors import DegenerateInputError, DomainError, ShapeError
from .matrix import Matrix

# 方差低于此阈值的列视为常数列
ZERO_VARIANCE = 1e-300


def column_stats(m: Matrix) -> Tuple[np.ndarray, np.ndarray]:
    """
    每列均值与总体方差（除以 N，与 BN 一致）

    Returns:
        (means, variances)
    """
    if m.ndim != 2:
        raise ShapeError(f"column_stats 需要二维矩阵，实际 {m.shape}")
    if m.shape[0] < 2:
        raise DomainError(f"column_stats 至少需要 2 行，实际 {m.shape[0]}")
    means = m.mean(axis=0)
    # 两遍算法
    variances = ((m - means) ** 2).mean(axis=0)
    return means, variances


def pooled_variance(m: Matrix) -> float:
    """对 batch 与宽度合并后的总体方差"""
    return float(np.var(m))


def _standardize(m: Matrix) -> Tuple[np.ndarray, np.ndarray]:
    means, variances = column_stats(m)
    keep = variances > ZERO_VARIANCE
    z = (m[:, keep] - means[keep]) / np.sqrt(variances[keep])
    return z, keep


def pairwise_abs_corr(m: Matrix) -> float:
    """
    所有有序列对 i≠j 的 |Pearson 相关系数| 平均值，常数列不参与

    Raises:
        DegenerateInputError: 可用列少于 2
    """
    if m.shape[1] < 2:
        raise DomainError(f"pairwise_abs_corr 至少需要 2 列，实际 {m.shape[1]}")
    z, keep = _standardize(m)
    c = int(keep.sum())
    if c < 2:
        raise DegenerateInputError(f"非常数列只有 {c} 列，无法计算列间相关")
    corr = np.abs(z.T @ z) / m.shape[0]
    np.clip(corr, 0.0, 1.0, out=corr)
    off_diag = corr.sum() - np.trace(corr)
    return float(off_diag / (c * (c - 1)))


def matched_abs_corr(x: Matrix, g: Matrix) -> float:
    """
    对应列 |Corr(x_i, g_i)| 的平均值，任一侧为常数的列不参与

    Raises:
        ShapeError: 形状不一致
        DegenerateInputError: 没有可用列
    """
    if x.shape != g.shape:
        raise ShapeError(f"matched_abs_corr 形状不一致: {x.shape} vs {g.shape}")
    mx, vx = column_stats(x)
    mg, vg = column_stats(g)
    keep = (vx > ZERO_VARIANCE) & (vg > ZERO_VARIANCE)
    if not keep.any():
        raise DegenerateInputError("所有列均为常数，无法计算激活-梯度相关")
    cov = ((x[:, keep] - mx[keep]) * (g[:, keep] - mg[keep])).mean(axis=0)
    corr = np.abs(cov / np.sqrt(vx[keep] * vg[keep]))
    return float(np.clip(corr, 0.0, 1.0).mean())
