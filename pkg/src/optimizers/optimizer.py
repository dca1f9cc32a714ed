"""
逐层优化器
每个参数张量各持一份动量状态；权重（Dense W）按配置的规则更新，
偏置与 BN 参数默认走普通 SGD（adapt_bn_bias 打开时同样使用自适应规则）
"""

import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from ..errors import PreconditionError, ShapeError
from ..network import NetworkState
from .rules import (
    step_agc,
    step_clars_norms,
    step_lalc,
    step_lamb,
    step_lambc,
    step_lars,
    step_sgd,
)
from .schedule import schedule_lr
from .spec import OptimizerKind, OptimizerSpec, ScheduleSpec

logger = logging.getLogger(__name__)


@dataclass
class LayerOptimizerState:
    """单个参数张量的动量缓冲与已执行步数"""
    momentum_buffer: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, w: np.ndarray) -> "LayerOptimizerState":
        return cls(np.zeros_like(w))


def momentum_update(
    state: LayerOptimizerState,
    g: np.ndarray,
    w: np.ndarray,
    momentum: float,
    weight_decay: float,
) -> np.ndarray:
    """
    g′ = g + β·w；m ← momentum·m + g′

    Returns:
        更新后的 m（同一数组也写回 state）

    Raises:
        ShapeError: g、w 与动量缓冲形状不一致
    """
    if g.shape != w.shape or g.shape != state.momentum_buffer.shape:
        raise ShapeError(f"梯度 {g.shape}、参数 {w.shape}、动量 {state.momentum_buffer.shape} 形状不一致")
    g_decayed = g + weight_decay * w if weight_decay else g
    state.momentum_buffer = momentum * state.momentum_buffer + g_decayed
    state.t += 1
    return state.momentum_buffer


class LayerwiseOptimizer:
    """按层应用 SGD / LARS / LAMB / LAMBC / CLARS / AGC / LALC"""

    def __init__(self, spec: OptimizerSpec, schedule: ScheduleSpec):
        self.spec = spec.resolve(schedule.batch_size)
        self.schedule = schedule
        self.states: Dict[str, LayerOptimizerState] = {}
        logger.info(f"优化器: {self.spec.kind.value}, η={self.spec.eta}, ε={self.spec.eps}, "
                    f"有效基础学习率 {schedule.effective_base_lr:.4g}")

    @property
    def needs_per_sample_norms(self) -> bool:
        return self.spec.kind == OptimizerKind.CLARS

    def lr(self, t: int) -> float:
        return schedule_lr(self.schedule, t)

    def _adapts(self, role: str) -> bool:
        if self.spec.kind == OptimizerKind.SGD:
            return False
        return role == 'weight' or self.spec.adapt_bn_bias

    def _update(
        self,
        name: str,
        w: np.ndarray,
        m: np.ndarray,
        g: np.ndarray,
        gamma_t: float,
        sample_norms: Optional[np.ndarray],
    ) -> Tuple[np.ndarray, float]:
        """按配置的规则更新一个自适应参数，返回 (新参数, 记录用的标量步长)"""
        s = self.spec
        kind = s.kind
        if kind == OptimizerKind.LARS:
            return step_lars(w, m, g, gamma_t, s.eta, s.eps, s.weight_decay)
        if kind == OptimizerKind.LAMB:
            return step_lamb(w, m, gamma_t, s.eps, s.phi)
        if kind == OptimizerKind.LAMBC:
            return step_lambc(w, m, gamma_t, s.eps, s.clip_mu, s.phi)
        if kind == OptimizerKind.CLARS:
            if sample_norms is None:
                raise PreconditionError(f"CLARS 更新参数 {name} 需要逐样本梯度范数")
            return step_clars_norms(w, m, sample_norms, gamma_t, s.eta, s.eps)
        if kind == OptimizerKind.AGC:
            return step_agc(w, m, gamma_t, s.eta, s.eps)
        if kind == OptimizerKind.LALC:
            return step_lalc(w, m, gamma_t, s.eta, s.eps)
        return step_sgd(w, m, gamma_t)

    def step(
        self,
        net: NetworkState,
        grads: Mapping[str, np.ndarray],
        t: int,
        per_sample_norms: Optional[Mapping[str, np.ndarray]] = None,
    ) -> Dict[str, float]:
        """
        对网络全部参数执行一次更新

        Args:
            net: 网络（原地更新参数）
            grads: 参数全名 → 批梯度
            t: 全局步数，用于学习率调度
            per_sample_norms: 参数全名 → 逐样本梯度范数 (B,)，CLARS 需要

        Returns:
            参数全名 → 实际步长
        """
        gamma_t = self.lr(t)
        applied: Dict[str, float] = {}
        for name, role, w in net.named_parameters():
            if name not in grads:
                raise ShapeError(f"缺少参数 {name} 的梯度")
            g = grads[name]
            state = self.states.get(name)
            if state is None:
                state = self.states[name] = LayerOptimizerState.zeros_like(w)
            m = momentum_update(state, g, w, self.spec.momentum, self.spec.weight_decay)

            if self._adapts(role):
                norms = per_sample_norms.get(name) if per_sample_norms is not None else None
                new_w, step = self._update(name, w, m, g, gamma_t, norms)
            else:
                new_w, step = step_sgd(w, m, gamma_t)
            net.set_parameter(name, new_w)
            applied[name] = float(step)
        return applied
