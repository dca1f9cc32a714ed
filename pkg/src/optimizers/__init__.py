"""
优化器模块
逐层自适应学习率规则（LARS 系、AGC、LALC）、动量与学习率调度
"""

from .spec import (
    DEFAULT_CLIP_MU,
    DEFAULT_EPS,
    DEFAULT_ETA,
    DecayKind,
    OptimizerKind,
    OptimizerSpec,
    ScheduleSpec,
    default_eps,
    default_eta,
)
from .schedule import schedule_lr
from .rules import (
    ZERO_NORM_SENTINEL,
    agc_trust_ratios,
    clars_trust_ratio,
    frobenius_norm,
    lalc_lambda,
    lalc_step_size,
    lambc_trust_ratio,
    lars_trust_ratio,
    step_agc,
    step_clars,
    step_clars_norms,
    step_lalc,
    step_lamb,
    step_lambc,
    step_lars,
    step_sgd,
)
from .optimizer import LayerOptimizerState, LayerwiseOptimizer, momentum_update

__all__ = [
    'DEFAULT_CLIP_MU',
    'DEFAULT_EPS',
    'DEFAULT_ETA',
    'DecayKind',
    'OptimizerKind',
    'OptimizerSpec',
    'ScheduleSpec',
    'default_eps',
    'default_eta',
    'schedule_lr',
    'ZERO_NORM_SENTINEL',
    'agc_trust_ratios',
    'clars_trust_ratio',
    'frobenius_norm',
    'lalc_lambda',
    'lalc_step_size',
    'lambc_trust_ratio',
    'lars_trust_ratio',
    'step_agc',
    'step_clars',
    'step_clars_norms',
    'step_lalc',
    'step_lamb',
    'step_lambc',
    'step_lars',
    'step_sgd',
    'LayerOptimizerState',
    'LayerwiseOptimizer',
    'momentum_update',
]
