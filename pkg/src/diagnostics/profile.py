"""
梯度爆炸剖面
在块输入边界上，把 batch 与宽度合并计算梯度的总体方差
"""

import math
from dataclasses import dataclass
from typing import Dict, List

import numpy as np
import pandas as pd

from ..errors import DegenerateInputError
from ..network import BackwardTrace, ForwardTrace
from ..tensor_core import column_stats, pooled_variance


@dataclass
class ExplosionProfile:
    """
    逐块与累计的梯度方差比

    per_layer_ratio[n] = Var(g^n)/Var(g^{n+1})，长度比边界数少 1
    cumulative_rate[n] = √(Var(g^n)/Var(g^N))，输出边界处恰为 1
    """
    boundaries: List[int]
    var_g: List[float]
    per_layer_ratio: List[float]
    cumulative_rate: List[float]

    def to_frame(self) -> pd.DataFrame:
        ratios = self.per_layer_ratio + [float('nan')]
        return pd.DataFrame({
            'layer': list(range(len(self.var_g))),
            'var_g': self.var_g,
            'per_layer_ratio': ratios,
            'cumulative_rate': self.cumulative_rate,
        })

    def to_dict(self) -> Dict:
        return {
            'boundaries': self.boundaries,
            'var_g': self.var_g,
            'per_layer_ratio': self.per_layer_ratio,
            'cumulative_rate': self.cumulative_rate,
        }


def explosion_profile(bt: BackwardTrace) -> ExplosionProfile:
    """
    由反向轨迹计算爆炸剖面

    Raises:
        DegenerateInputError: 轨迹为空或输出梯度方差为 0
    """
    if not bt.block_index:
        raise DegenerateInputError("反向轨迹为空")
    var_g = [pooled_variance(g) for g in bt.blocks]
    out = var_g[-1]
    if not out > 0:
        raise DegenerateInputError("输出梯度方差为 0，爆炸率无定义")

    ratios = []
    for upper, lower in zip(var_g[:-1], var_g[1:]):
        ratios.append(upper / lower if lower > 0 else float('inf'))
    cumulative = [math.sqrt(v / out) for v in var_g[:-1]] + [1.0]
    return ExplosionProfile(list(bt.block_index), var_g, ratios, cumulative)


def gradient_rate(profile: ExplosionProfile) -> float:
    """逐块梯度标准差比 √per_layer_ratio 的几何平均"""
    if not profile.per_layer_ratio:
        return 1.0
    ratios = np.asarray(profile.per_layer_ratio)
    return float(np.exp(0.5 * np.log(ratios).mean()))


def weighted_block_ratio(ft: ForwardTrace, bt: BackwardTrace) -> List[float]:
    """
    按列加权的块比率 Σ_i Var(x_i^n)Var(g_i^n) / Σ_j Var(x_j^{n+1})Var(g_j^{n+1})
    """
    products = []
    for x, g in zip(ft.blocks, bt.blocks):
        _, vx = column_stats(x)
        _, vg = column_stats(g)
        products.append(float((vx * vg).sum()))
    return [a / b if b > 0 else float('inf') for a, b in zip(products[:-1], products[1:])]
