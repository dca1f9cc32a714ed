"""
诊断模块
把前向/反向轨迹转换为爆炸剖面、逐层统计与 Hessian 平方律探针
"""

from .profile import ExplosionProfile, explosion_profile, gradient_rate, weighted_block_ratio
from .reports import LayerReport, layer_report, reports_to_frame
from .hessian import HessianSample, frozen_stats, hessian_probe, loglog_slope, mse_gradients, samples_to_frame
from .probes import (
    CorrelatedProbeResult,
    correlated_block_probe,
    init_profile,
    injected_probe,
    mean_shift_sweep,
)
from .writers import (
    SCHEMAS,
    read_schema_csv,
    schema_tag,
    write_hessian_csv,
    write_layers_csv,
    write_profile_csv,
    write_schema_csv,
)

__all__ = [
    'ExplosionProfile',
    'explosion_profile',
    'gradient_rate',
    'weighted_block_ratio',
    'LayerReport',
    'layer_report',
    'reports_to_frame',
    'HessianSample',
    'frozen_stats',
    'hessian_probe',
    'loglog_slope',
    'mse_gradients',
    'samples_to_frame',
    'CorrelatedProbeResult',
    'correlated_block_probe',
    'init_profile',
    'injected_probe',
    'mean_shift_sweep',
    'SCHEMAS',
    'read_schema_csv',
    'schema_tag',
    'write_hessian_csv',
    'write_layers_csv',
    'write_profile_csv',
    'write_schema_csv',
]
