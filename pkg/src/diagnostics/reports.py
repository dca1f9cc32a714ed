"""
逐层统计报告：梯度/激活/权重方差、均值-标准差比、激活-梯度相关、激活列间相关
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from ..errors import DegenerateInputError, DomainError
from ..network import BackwardTrace, ForwardTrace, NetworkState
from ..tensor_core import column_stats, matched_abs_corr, pairwise_abs_corr, pooled_variance
from ..tensor_core.stats import ZERO_VARIANCE

logger = logging.getLogger(__name__)


@dataclass
class LayerReport:
    """单个块输入边界上的统计量；无法计算的字段为 None"""
    layer_index: int
    var_x: float
    var_g: float
    var_w: Optional[float]
    mean_std_ratio: Optional[float]
    corr_xg: Optional[float]
    corr_xx: Optional[float]
    step: int = 0

    def to_dict(self) -> Dict:
        return asdict(self)


def _mean_std_ratio(x: np.ndarray) -> Optional[float]:
    try:
        means, variances = column_stats(x)
    except DomainError:
        return None
    keep = variances > ZERO_VARIANCE
    if not keep.any():
        return None
    return float((means[keep] / np.sqrt(variances[keep])).mean())


def _safe(fn, *args) -> Optional[float]:
    try:
        return fn(*args)
    except (DegenerateInputError, DomainError):
        return None


def layer_report(ft: ForwardTrace, bt: BackwardTrace, state: NetworkState, step: int = 0) -> List[LayerReport]:
    """
    计算每个块输入边界的统计量

    Args:
        ft, bt: 同一次前向/反向的轨迹
        state: 网络（用于读取块内 Dense 权重）
        step: 记录用的优化步编号

    Returns:
        LayerReport 列表，与 ft.block_index 对齐
    """
    dense = state.block_dense()
    reports = []
    for n, (x, g) in enumerate(zip(ft.blocks, bt.blocks)):
        layer = dense[n] if n < len(dense) else None
        reports.append(LayerReport(
            layer_index=n,
            var_x=pooled_variance(x),
            var_g=pooled_variance(g),
            var_w=float(np.var(layer.W)) if layer is not None else None,
            mean_std_ratio=_mean_std_ratio(x),
            corr_xg=_safe(matched_abs_corr, x, g),
            corr_xx=_safe(pairwise_abs_corr, x) if x.shape[1] >= 2 else None,
            step=step,
        ))
    return reports


def reports_to_frame(reports: List[LayerReport]) -> pd.DataFrame:
    columns = ['layer', 'step', 'var_x', 'var_g', 'var_w', 'mean_std_ratio', 'corr_xg', 'corr_xx']
    rows = [{
        'layer': r.layer_index, 'step': r.step, 'var_x': r.var_x, 'var_g': r.var_g,
        'var_w': r.var_w, 'mean_std_ratio': r.mean_std_ratio, 'corr_xg': r.corr_xg, 'corr_xx': r.corr_xx,
    } for r in reports]
    return pd.DataFrame(rows, columns=columns)
