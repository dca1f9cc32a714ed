"""
逐层自适应更新规则
每条规则都是 w ← w − γ_t·τ·m：τ 为信任比（AGC 为逐输出列的向量），更新方向始终与 m 平行。
范数均为整层张量的 Frobenius 范数；AGC 的 "unit" 是 W (in × out) 的一列，即一个输出神经元的扇入向量。
"""

import math
import logging
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from ..errors import DomainError, ShapeError

logger = logging.getLogger(__name__)

# ‖w‖ = 0 时替代 ‖m‖²/‖w‖² 的哨兵值，使 LALC 的 λ ≈ 0
ZERO_NORM_SENTINEL = 1e300


def frobenius_norm(x: np.ndarray) -> float:
    return float(np.linalg.norm(np.ravel(x)))


def _check_shapes(w: np.ndarray, m: np.ndarray):
    if w.shape != m.shape:
        raise ShapeError(f"参数形状 {w.shape} 与更新方向形状 {m.shape} 不一致")


def _apply(w: np.ndarray, m: np.ndarray, scale) -> np.ndarray:
    return w - scale * m


# ---------- 信任比 ----------

def lars_trust_ratio(w_norm: float, g_norm: float, eta: float, eps: float, beta: float = 0.0) -> float:
    """τ = η‖w‖ / (‖g‖ + β‖w‖ + ε)，分母为 0（w、g 全零且 ε = 0）时取 0"""
    denom = g_norm + beta * w_norm + eps
    if denom == 0.0:
        return 0.0
    return eta * w_norm / denom


def lambc_trust_ratio(
    w_norm: float,
    m_norm: float,
    eps: float,
    clip_mu: float = math.inf,
    phi: Optional[Callable[[float], float]] = None,
) -> float:
    """τ = min(φ(‖w‖) / (‖m‖ + ε), μ)；μ = ∞ 即无截断的 LAMB 缩放"""
    scaled = phi(w_norm) if phi is not None else w_norm
    denom = m_norm + eps
    ratio = scaled / denom if denom > 0.0 else math.inf
    ratio = min(ratio, clip_mu)
    # m = 0 且 ε = 0：更新量本来就是 0
    return 0.0 if math.isinf(ratio) else ratio


def clars_trust_ratio(w_norm: float, sample_norms: Sequence[float], eta: float, eps: float) -> float:
    """
    τ = η‖w‖ / (mean_b ‖g_b‖ + ε)

    Raises:
        DomainError: 没有逐样本梯度
    """
    norms = np.asarray(sample_norms, dtype=np.float64).reshape(-1)
    if norms.size == 0:
        raise DomainError("CLARS 需要至少一个逐样本梯度")
    denom = float(norms.mean()) + eps
    if denom == 0.0:
        return 0.0
    return eta * w_norm / denom


def agc_trust_ratios(w: np.ndarray, m: np.ndarray, eta: float, eps: float) -> np.ndarray:
    """
    逐单元 τ_u = min(η‖w_u‖ / (‖m_u‖ + ε), 1)

    二维参数按列取单元，一维参数（偏置、BN）整体为一个单元。‖w_u‖ = 0 的单元 τ_u = 0。

    Returns:
        二维参数返回长度 out 的向量，一维参数返回形状 (1,) 的向量
    """
    _check_shapes(w, m)
    if w.ndim == 2:
        w_norms = np.linalg.norm(w, axis=0)
        m_norms = np.linalg.norm(m, axis=0)
    else:
        w_norms = np.array([frobenius_norm(w)])
        m_norms = np.array([frobenius_norm(m)])
    denom = m_norms + eps
    ratios = np.ones_like(w_norms)
    np.divide(eta * w_norms, denom, out=ratios, where=denom > 0.0)
    ratios = np.minimum(ratios, 1.0)
    ratios[w_norms == 0.0] = 0.0
    return ratios


def lalc_lambda(w_norm: float, m_norm: float, eta: float, eps: float) -> float:
    """λ = 1 / (η‖m‖²/‖w‖² + ε)；‖w‖ = 0 时比值换成哨兵值"""
    ratio = (m_norm / w_norm) ** 2 if w_norm > 0.0 else ZERO_NORM_SENTINEL
    denom = eta * ratio + eps
    if denom == 0.0:
        return math.inf
    return 1.0 / denom


def lalc_step_size(w_norm: float, m_norm: float, gamma_t: float, eta: float, eps: float) -> float:
    """实际步长 min(γ_t, λ)"""
    return min(gamma_t, lalc_lambda(w_norm, m_norm, eta, eps))


# ---------- 单层更新 ----------
# 每个 step_* 返回 (新参数, 实际步长)；AGC 的步长记为 γ_t 乘以各列信任比的平均

def step_sgd(w: np.ndarray, m: np.ndarray, gamma_t: float) -> Tuple[np.ndarray, float]:
    """w ← w − γ_t·m"""
    _check_shapes(w, m)
    return _apply(w, m, gamma_t), gamma_t


def step_lars(
    w: np.ndarray,
    m: np.ndarray,
    g: np.ndarray,
    gamma_t: float,
    eta: float,
    eps: float,
    weight_decay: float,
) -> Tuple[np.ndarray, float]:
    """LARS：分母使用原始梯度 g 的范数，方向为动量 m"""
    _check_shapes(w, m)
    _check_shapes(w, g)
    step = gamma_t * lars_trust_ratio(frobenius_norm(w), frobenius_norm(g), eta, eps, weight_decay)
    return _apply(w, m, step), step


def step_lambc(
    w: np.ndarray,
    m: np.ndarray,
    gamma_t: float,
    eps: float,
    clip_mu: float,
    phi: Optional[Callable[[float], float]] = None,
) -> Tuple[np.ndarray, float]:
    """LAMBC：信任比上限为 μ"""
    _check_shapes(w, m)
    if not clip_mu > 0:
        raise DomainError(f"clip_mu 必须 > 0，实际 {clip_mu}")
    step = gamma_t * lambc_trust_ratio(frobenius_norm(w), frobenius_norm(m), eps, clip_mu, phi)
    return _apply(w, m, step), step


def step_lamb(
    w: np.ndarray,
    m: np.ndarray,
    gamma_t: float,
    eps: float,
    phi: Optional[Callable[[float], float]] = None,
) -> Tuple[np.ndarray, float]:
    """无截断的 LAMB 缩放，τ = φ(‖w‖)/(‖m‖+ε)"""
    return step_lambc(w, m, gamma_t, eps, math.inf, phi)


def step_clars_norms(
    w: np.ndarray,
    m: np.ndarray,
    sample_norms: Sequence[float],
    gamma_t: float,
    eta: float,
    eps: float,
) -> Tuple[np.ndarray, float]:
    """CLARS，直接给出逐样本梯度范数 (B,)；训练循环只追踪范数，不构造逐样本梯度"""
    _check_shapes(w, m)
    step = gamma_t * clars_trust_ratio(frobenius_norm(w), sample_norms, eta, eps)
    return _apply(w, m, step), step


def step_clars(
    w: np.ndarray,
    m: np.ndarray,
    per_sample_grads: Sequence[np.ndarray],
    gamma_t: float,
    eta: float,
    eps: float,
) -> Tuple[np.ndarray, float]:
    """
    CLARS：分母为逐样本梯度范数的平均

    Raises:
        DomainError: per_sample_grads 为空
        ShapeError: 某个逐样本梯度形状与 w 不同
    """
    if len(per_sample_grads) == 0:
        raise DomainError("CLARS 需要至少一个逐样本梯度")
    for g_b in per_sample_grads:
        _check_shapes(w, np.asarray(g_b))
    return step_clars_norms(w, m, [frobenius_norm(g_b) for g_b in per_sample_grads], gamma_t, eta, eps)


def step_agc(w: np.ndarray, m: np.ndarray, gamma_t: float, eta: float, eps: float) -> Tuple[np.ndarray, float]:
    """AGC：逐输出列裁剪"""
    ratios = agc_trust_ratios(w, m, eta, eps)
    scale = gamma_t * ratios if w.ndim == 2 else gamma_t * float(ratios[0])
    return _apply(w, m, scale), float(gamma_t * ratios.mean())


def step_lalc(
    w: np.ndarray,
    m: np.ndarray,
    gamma_t: float,
    eta: float,
    eps: float,
) -> Tuple[np.ndarray, float]:
    """
    LALC：w ← w − min(γ_t, λ)·m

    Returns:
        (新参数, 实际步长)
    """
    _check_shapes(w, m)
    step = lalc_step_size(frobenius_norm(w), frobenius_norm(m), gamma_t, eta, eps)
    return _apply(w, m, step), step
