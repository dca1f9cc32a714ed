"""
实验框架模块
数据集、损失、逐样本梯度、训练循环与实验编排
"""

from .datasets import (
    Dataset,
    build_dataset,
    load_csv,
    load_idx,
    load_idx_images,
    load_idx_labels,
    synth_gaussian_classes,
    synth_regression,
    write_csv,
)
from .losses import accuracy, loss_for, mean_squared_error, softmax_cross_entropy
from .per_sample import (
    per_sample_grad_norms,
    per_sample_grads,
    trace_per_sample_grads,
    trace_per_sample_norms,
)
from .trainer import STATUS_DIVERGED, STATUS_OK, MetricsLog, Trainer, train
from .runner import STATUS_ERROR, ExperimentRunner, aggregate_runs, collect_configs, sample_std

__all__ = [
    'Dataset',
    'build_dataset',
    'load_csv',
    'load_idx',
    'load_idx_images',
    'load_idx_labels',
    'synth_gaussian_classes',
    'synth_regression',
    'write_csv',
    'accuracy',
    'loss_for',
    'mean_squared_error',
    'softmax_cross_entropy',
    'per_sample_grad_norms',
    'per_sample_grads',
    'trace_per_sample_grads',
    'trace_per_sample_norms',
    'STATUS_DIVERGED',
    'STATUS_OK',
    'MetricsLog',
    'Trainer',
    'train',
    'STATUS_ERROR',
    'ExperimentRunner',
    'aggregate_runs',
    'collect_configs',
    'sample_std',
]
