"""
损失函数
均返回 (批平均损失, 对网络输出的梯度)；逐样本梯度为批梯度乘以 B
"""

from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.special import log_softmax, softmax

from ..errors import ShapeError

LossFn = Callable[[np.ndarray, np.ndarray], Tuple[float, np.ndarray]]


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    softmax 交叉熵（log-sum-exp 稳定化）

    Args:
        logits: B × C
        labels: 长度 B 的整数类别
    """
    labels = np.asarray(labels).reshape(-1)
    if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise ShapeError(f"logits 形状 {logits.shape} 与标签数 {labels.shape[0]} 不符")
    n = logits.shape[0]
    rows = np.arange(n)
    log_p = log_softmax(logits, axis=1)
    loss = float(-log_p[rows, labels].mean())
    grad = softmax(logits, axis=1)
    grad[rows, labels] -= 1.0
    return loss, grad / n


def mean_squared_error(outputs: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """L = mean_s Σ_j (y_sj − t_sj)²"""
    if outputs.shape != targets.shape:
        raise ShapeError(f"输出形状 {outputs.shape} 与目标形状 {targets.shape} 不符")
    n = outputs.shape[0]
    residual = outputs - targets
    loss = float((residual ** 2).sum(axis=1).mean())
    return loss, 2.0 * residual / n


LOSSES: Dict[str, LossFn] = {
    'classification': softmax_cross_entropy,
    'regression': mean_squared_error,
}


def loss_for(task: str) -> LossFn:
    return LOSSES[task]


def accuracy(outputs: np.ndarray, targets: np.ndarray, task: str) -> Optional[float]:
    """分类准确率；回归任务返回 None"""
    if task != 'classification':
        return None
    return float((outputs.argmax(axis=1) == np.asarray(targets).reshape(-1)).mean())
