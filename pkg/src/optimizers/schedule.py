"""学习率调度"""

import math

from ..errors import DomainError
from .spec import DecayKind, ScheduleSpec


def schedule_lr(spec: ScheduleSpec, t: int) -> float:
    """
    第 t 步（从 0 计）的学习率

    预热阶段 γ_t = γ_base·(t+1)/warmup；之后按余弦从 γ_base 衰减到 0，或保持常数

    Raises:
        DomainError: t 不在 [0, total_steps) 内
    """
    if not 0 <= t < spec.total_steps:
        raise DomainError(f"步数 t={t} 不在 [0, {spec.total_steps}) 内")
    base = spec.effective_base_lr
    if t < spec.warmup_steps:
        return base * (t + 1) / spec.warmup_steps
    if spec.decay == DecayKind.CONSTANT:
        return base
    progress = (t - spec.warmup_steps) / (spec.total_steps - spec.warmup_steps)
    return base * 0.5 * (1.0 + math.cos(math.pi * progress))
