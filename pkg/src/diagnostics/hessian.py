"""
Hessian 对角元与梯度的平方律探针

对分段线性、单输出网络，固定 BN 统计量后 dx^N/dw 在 w 附近为常数，因此
    d²L/dw² = mean_s (dx_s^N/dw)²·l''(x_s^N)
平方误差 l = (x − t)² 时 l'' = 2。逐样本的 dx_s^N/dW_ij = a_si·δ_sj，
a 为 Dense 层输入，δ 为以 g_out = 1 冻结统计量反向得到的 Dense 层输出梯度。

逐样本恒等式 h_s = (g_s / l'(x_s))²·l'' 只对单个样本成立，批平均的梯度会让正负项相互抵消，
所以每层的梯度尺度取逐样本梯度 2·r_s·dx_s^N/dw 在样本与抽样参数上的均方根，
Hessian 尺度取抽样对角元的平均；两者都按参数个数归一，抽样个数不同的层可以直接比较。
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from ..errors import DegenerateInputError, PreconditionError, ShapeError
from ..network import BNMode, NetworkState, backward, forward
from ..tensor_core import Matrix, RngStream

logger = logging.getLogger(__name__)

MSE_CURVATURE = 2.0


@dataclass
class HessianSample:
    """
    单个 Dense 层上抽样参数的梯度尺度与 Hessian 对角尺度

    grad_norm 为逐样本梯度的均方根，hess_norm 为对角元的平均；
    grads / hessians 为各抽样参数的批平均梯度与精确对角元
    """
    layer_index: int
    grad_norm: float
    hess_norm: float
    subset_size: int
    layer_name: str = ''
    indices: np.ndarray = field(default=None, repr=False)
    grads: np.ndarray = field(default=None, repr=False)
    hessians: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.grad_norm) and np.isfinite(self.hess_norm)):
            raise DegenerateInputError(f"第 {self.layer_index} 层范数非有限")

    def to_dict(self) -> Dict:
        return {
            'layer': self.layer_index,
            'grad_norm': self.grad_norm,
            'hess_norm': self.hess_norm,
            'subset_size': self.subset_size,
        }


def _check_preconditions(state: NetworkState):
    curved = [str(k) for k in state.activation_kinds() if not k.is_piecewise_linear]
    if curved:
        raise PreconditionError(f"Hessian 探针要求分段线性网络，发现弯曲/随机激活: {curved}")
    if state.output_dim != 1:
        raise PreconditionError(f"Hessian 探针要求单输出网络，实际输出维度 {state.output_dim}")


def frozen_stats(state: NetworkState, batch: Matrix) -> Dict:
    """以当前模式前向一次，取各 BN 层所用的统计量（不更新运行统计量）"""
    return forward(state, batch, update_running_stats=False).bn_stats


def mse_gradients(state: NetworkState, batch: Matrix, targets: Matrix, bn_stats: Dict) -> Dict[str, np.ndarray]:
    """固定 BN 统计量下 L = mean_s (x_s − t_s)² 的参数梯度"""
    ft = forward(state, batch, update_running_stats=False, bn_stats=bn_stats)
    g_out = MSE_CURVATURE * (ft.output - targets) / batch.shape[0]
    return backward(state, ft, g_out, mode=BNMode.FROZEN).param_grads


def hessian_probe(
    state: NetworkState,
    batch: Matrix,
    rng: RngStream,
    k: int = 1000,
    targets: Optional[Matrix] = None,
) -> List[HessianSample]:
    """
    对每个 Dense 层抽样 k 个权重，计算 dL/dw 与精确的 d²L/dw²

    L = mean_s (x_s − t_s)²；每层的 grad_norm 为逐样本梯度的均方根，hess_norm 为对角元平均

    Args:
        state: 分段线性、单输出网络
        batch: 输入批
        rng: 抽样用随机数流
        k: 每层抽样参数个数（不超过该层参数总数）
        targets: 回归目标 (B × 1)，缺省为 0

    Returns:
        每个 Dense 层一个 HessianSample

    Raises:
        PreconditionError: 含弯曲激活或输出维度不为 1
    """
    _check_preconditions(state)
    n = batch.shape[0]
    if targets is None:
        targets = np.zeros((n, 1))
    if targets.shape != (n, 1):
        raise ShapeError(f"targets 形状应为 ({n}, 1)，实际 {targets.shape}")

    stats = frozen_stats(state, batch)
    ft = forward(state, batch, update_running_stats=False, bn_stats=stats)
    residual = (ft.output - targets)[:, 0]
    bt = backward(state, ft, np.ones((n, 1)), mode=BNMode.FROZEN)

    samples = []
    for index, layer in enumerate(state.dense_layers()):
        a = ft.caches[layer.name]
        delta = bt.out_grads[layer.name]
        in_dim, out_dim = layer.W.shape
        size = min(k, in_dim * out_dim)
        flat = rng.choice(in_dim * out_dim, size)
        rows, cols = np.divmod(flat, out_dim)

        jac = a[:, rows] * delta[:, cols]
        per_sample = MSE_CURVATURE * residual[:, None] * jac
        grads = per_sample.mean(axis=0)
        hess = MSE_CURVATURE * (jac ** 2).mean(axis=0)
        samples.append(HessianSample(
            layer_index=index,
            grad_norm=float(np.sqrt(np.mean(per_sample ** 2))),
            hess_norm=float(hess.mean()),
            subset_size=size,
            layer_name=layer.name,
            indices=flat,
            grads=grads,
            hessians=hess,
        ))
        logger.debug(f"Hessian 探针 第 {index} 层: g={samples[-1].grad_norm:.4e}, h={samples[-1].hess_norm:.4e}")
    return samples


def loglog_slope(samples: List[HessianSample]) -> float:
    """
    log(hess_norm) 对 log(grad_norm) 的最小二乘斜率

    Raises:
        DegenerateInputError: 可用点少于 3 个或 log‖g‖ 无变化
    """
    usable = [s for s in samples if s.grad_norm > 0 and s.hess_norm > 0]
    if len(usable) < 3:
        raise DegenerateInputError(f"至少需要 3 个正范数的层，实际 {len(usable)}")
    lg = np.log([s.grad_norm for s in usable])
    lh = np.log([s.hess_norm for s in usable])
    if np.ptp(lg) == 0:
        raise DegenerateInputError("所有层梯度范数相同，斜率无定义")
    slope, _ = np.polyfit(lg, lh, 1)
    return float(slope)


def samples_to_frame(samples: List[HessianSample]) -> pd.DataFrame:
    return pd.DataFrame(
        [{'layer': s.layer_index, 'grad_norm': s.grad_norm, 'hess_norm': s.hess_norm} for s in samples],
        columns=['layer', 'grad_norm', 'hess_norm'],
    )
