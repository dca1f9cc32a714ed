"""
逐样本梯度

BN 统计量冻结为整批的值后，网络对每一行是独立的仿射分段映射，因此一次冻结统计量的批量反向
（输出梯度取各样本自身损失的梯度）就给出全部逐样本梯度，与逐行单独反向的结果相同。
"""

import logging
from typing import Dict, List, Optional

import numpy as np

from ..network import BNMode, ForwardTrace, NetworkState, backward, forward
from ..tensor_core import RngStream
from .losses import loss_for

logger = logging.getLogger(__name__)


def _sample_output_grads(state: NetworkState, trace: ForwardTrace, targets: np.ndarray, task: str) -> np.ndarray:
    _, g = loss_for(task)(trace.output, targets)
    return g * trace.output.shape[0]


def trace_per_sample_grads(state: NetworkState, trace: ForwardTrace, sample_grads: np.ndarray) -> Dict[str, np.ndarray]:
    """
    Args:
        trace: 训练模式前向轨迹（其 BN 统计量即整批统计量）
        sample_grads: B × d_out，第 s 行为样本 s 自身损失对输出的梯度

    Returns:
        参数全名 → (B, *param.shape)
    """
    bt = backward(state, trace, sample_grads, mode=BNMode.FROZEN)
    grads = {}
    for layer in state.iter_layers():
        if layer.name not in bt.out_grads:
            continue
        for pname, value in layer.per_sample_grads(trace.caches, bt.out_grads[layer.name]).items():
            grads[f"{layer.name}.{pname}"] = value
    return grads


def trace_per_sample_norms(state: NetworkState, trace: ForwardTrace, sample_grads: np.ndarray) -> Dict[str, np.ndarray]:
    """同 trace_per_sample_grads，但只返回 Frobenius 范数 (B,)，不构造外积"""
    bt = backward(state, trace, sample_grads, mode=BNMode.FROZEN)
    norms = {}
    for layer in state.iter_layers():
        if layer.name not in bt.out_grads:
            continue
        for pname, value in layer.per_sample_norms(trace.caches, bt.out_grads[layer.name]).items():
            norms[f"{layer.name}.{pname}"] = value
    return norms


def per_sample_grads(
    state: NetworkState,
    batch: np.ndarray,
    targets: np.ndarray,
    task: str = 'regression',
    rng: Optional[RngStream] = None,
) -> List[Dict[str, np.ndarray]]:
    """
    每个样本自身损失对各参数的梯度

    Args:
        state: 网络（不更新 BN 运行统计量）
        batch: B × d_in
        targets: 回归为 B × d_out，分类为长度 B 的类别
        task: 'regression' | 'classification'
        rng: dropout 掩码的随机数流

    Returns:
        长度 B 的列表，第 s 个元素为 参数全名 → 梯度
    """
    trace = forward(state, batch, rng=rng, update_running_stats=False)
    stacked = trace_per_sample_grads(state, trace, _sample_output_grads(state, trace, targets, task))
    return [{name: value[s] for name, value in stacked.items()} for s in range(batch.shape[0])]


def per_sample_grad_norms(
    state: NetworkState,
    batch: np.ndarray,
    targets: np.ndarray,
    task: str = 'regression',
    rng: Optional[RngStream] = None,
) -> Dict[str, np.ndarray]:
    """参数全名 → 逐样本梯度范数 (B,)，供 CLARS 使用"""
    trace = forward(state, batch, rng=rng, update_running_stats=False)
    return trace_per_sample_norms(state, trace, _sample_output_grads(state, trace, targets, task))
