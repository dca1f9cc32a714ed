"""
训练循环
按 epoch 打乱（带种子）、微批梯度累积、逐层优化器更新；每 log_every 步记录一次诊断。
损失出现 NaN/Inf 时立即停止并记录 status="diverged"，不抛异常。
正常结束后以推理模式（BN 使用运行统计量，dropout 关闭）在整个训练集上评估一次。
"""

import os
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..config.run_config import RunConfig
from ..diagnostics import (
    explosion_profile,
    gradient_rate,
    layer_report,
    reports_to_frame,
    write_schema_csv,
)
from ..errors import ConfigError, DegenerateInputError
from ..network import NetworkState, backward, forward, init_network
from ..optimizers import LayerwiseOptimizer
from ..tensor_core import RngStream, has_nonfinite
from .datasets import Dataset, build_dataset
from .losses import accuracy, loss_for
from .per_sample import trace_per_sample_norms

logger = logging.getLogger(__name__)

STATUS_OK = 'ok'
STATUS_DIVERGED = 'diverged'

# RunConfig.seed 派生的子流编号
STREAM_DATA, STREAM_INIT, STREAM_SHUFFLE, STREAM_DROPOUT, STREAM_PROBE = range(5)


@dataclass
class MetricsLog:
    """一次训练的全部记录"""
    name: str
    seed: int
    metrics: List[Dict[str, Any]] = field(default_factory=list)
    layers: List[pd.DataFrame] = field(default_factory=list)
    profiles: List[Dict[str, Any]] = field(default_factory=list)
    steps: List[Dict[str, Any]] = field(default_factory=list)
    status: str = STATUS_OK
    steps_run: int = 0
    message: str = ''
    final_train_loss: Optional[float] = None
    final_train_accuracy: Optional[float] = None

    @property
    def diverged(self) -> bool:
        return self.status == STATUS_DIVERGED

    @property
    def final_loss(self) -> float:
        return self.metrics[-1]['loss'] if self.metrics else float('nan')

    @property
    def final_accuracy(self) -> float:
        return self.metrics[-1]['accuracy'] if self.metrics else float('nan')

    @property
    def reported_loss(self) -> float:
        """整个训练集上的最终损失；未评估（发散）时退回最后记录的批损失"""
        return self.final_train_loss if self.final_train_loss is not None else self.final_loss

    @property
    def reported_accuracy(self) -> float:
        if self.final_train_accuracy is not None:
            return self.final_train_accuracy
        return self.final_accuracy

    def metrics_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.metrics, columns=['step', 'epoch', 'lr', 'loss', 'accuracy', 'grad_rate'])

    def layers_frame(self) -> pd.DataFrame:
        columns = ['layer', 'step', 'var_x', 'var_g', 'var_w', 'mean_std_ratio', 'corr_xg', 'corr_xx']
        if not self.layers:
            return pd.DataFrame(columns=columns)
        return pd.concat(self.layers, ignore_index=True)[columns]

    def profile_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.profiles, columns=['step', 'layer', 'var_g', 'per_layer_ratio', 'cumulative_rate'])

    def steps_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.steps, columns=['step', 'param', 'applied_step'])

    def summary(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'seed': self.seed,
            'status': self.status,
            'steps_run': self.steps_run,
            'final_loss': self.final_loss,
            'final_accuracy': self.final_accuracy,
            'final_train_loss': self.final_train_loss,
            'final_train_accuracy': self.final_train_accuracy,
            'message': self.message,
        }

    def write(self, out_dir: str, config: Optional[RunConfig] = None) -> Dict[str, str]:
        """写出 metrics / layers / train_profile / steps 四个 CSV 与 summary.json"""
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            'metrics': os.path.join(out_dir, 'metrics.csv'),
            'layers': os.path.join(out_dir, 'layers.csv'),
            'train_profile': os.path.join(out_dir, 'train_profile.csv'),
            'steps': os.path.join(out_dir, 'steps.csv'),
            'summary': os.path.join(out_dir, 'summary.json'),
        }
        write_schema_csv(self.metrics_frame(), paths['metrics'], 'metrics')
        write_schema_csv(self.layers_frame(), paths['layers'], 'layers')
        write_schema_csv(self.profile_frame(), paths['train_profile'], 'train_profile')
        write_schema_csv(self.steps_frame(), paths['steps'], 'steps')

        summary = self.summary()
        summary['finished_at'] = datetime.utcnow().isoformat()
        if config is not None:
            summary['config'] = config.to_dict()
        with open(paths['summary'], 'w', encoding='utf-8') as f:
            json.dump(summary, f, ensure_ascii=False, indent=2, default=_json_default)
        logger.info(f"训练结果已保存: {out_dir}")
        return paths


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return str(value)


class Trainer:
    """单次训练运行（顺序执行，保证确定性）"""

    def __init__(self, config: RunConfig, dataset: Optional[Dataset] = None, bn_eps: Optional[float] = None,
                 bn_momentum: Optional[float] = None):
        config.require_training()
        self.config = config
        root = RngStream(config.seed)
        self.dataset = dataset if dataset is not None else build_dataset(config.dataset, root.spawn(STREAM_DATA))
        config.check_dataset_shape(self.dataset.input_dim, self.dataset.output_dim)
        if self.dataset.task != config.dataset.task:
            raise ConfigError(f"{config.name}: 数据任务 {self.dataset.task} 与配置 {config.dataset.task} 不一致")
        if self.dataset.n < config.schedule.batch_size:
            raise ConfigError(f"{config.name}: 数据集样本数 {self.dataset.n} 小于 batch_size {config.schedule.batch_size}")

        extra = {}
        if bn_eps is not None:
            extra['bn_eps'] = bn_eps
        if bn_momentum is not None:
            extra['bn_momentum'] = bn_momentum
        self.state: NetworkState = init_network(
            config.specs, config.init, root.spawn(STREAM_INIT),
            input_dim=config.input_dim, bn_mode=config.bn_mode, train=True, **extra,
        )
        self.optimizer = LayerwiseOptimizer(config.optimizer, config.schedule)
        self.loss_fn = loss_for(self.dataset.task)
        self.shuffle_rng = root.spawn(STREAM_SHUFFLE)
        self.dropout_rng = root.spawn(STREAM_DROPOUT)

    @property
    def steps_per_epoch(self) -> int:
        return self.dataset.n // self.config.schedule.batch_size

    def _accumulate(self, index: np.ndarray):
        """
        在一个有效批上累积梯度

        Returns:
            (平均损失, 平均准确率, 梯度, 逐样本范数或 None, 最后一个微批的 (ft, bt))
        """
        micro = self.config.micro_batch
        parts = len(index) // micro
        weight = 1.0 / parts
        grads: Dict[str, np.ndarray] = {}
        sample_norms: Dict[str, List[np.ndarray]] = {}
        loss_total, acc_total = 0.0, 0.0
        ft = bt = None
        for j in range(parts):
            xb, yb = self.dataset.batch(index[j * micro:(j + 1) * micro])
            ft = forward(self.state, xb, rng=self.dropout_rng)
            loss, g_out = self.loss_fn(ft.output, yb)
            loss_total += loss * weight
            acc = accuracy(ft.output, yb, self.dataset.task)
            acc_total += (acc if acc is not None else float('nan')) * weight
            if not np.isfinite(loss):
                return loss, acc_total, grads, None, (ft, None)
            bt = backward(self.state, ft, g_out)
            for name, value in bt.param_grads.items():
                grads[name] = grads[name] + weight * value if name in grads else weight * value
            if self.optimizer.needs_per_sample_norms:
                for name, value in trace_per_sample_norms(self.state, ft, g_out * micro).items():
                    sample_norms.setdefault(name, []).append(value)
        norms = {k: np.concatenate(v) for k, v in sample_norms.items()} if sample_norms else None
        return loss_total, acc_total, grads, norms, (ft, bt)

    def _log(self, log: MetricsLog, t: int, epoch: int, lr: float, loss: float, acc: float, traces):
        ft, bt = traces
        rate = float('nan')
        try:
            profile = explosion_profile(bt)
            rate = gradient_rate(profile)
            for layer, row in enumerate(profile.to_frame().itertuples(index=False)):
                log.profiles.append({
                    'step': t, 'layer': layer, 'var_g': row.var_g,
                    'per_layer_ratio': row.per_layer_ratio, 'cumulative_rate': row.cumulative_rate,
                })
        except DegenerateInputError as e:
            logger.debug(f"第 {t} 步爆炸剖面无定义: {e}")
        log.layers.append(reports_to_frame(layer_report(ft, bt, self.state, step=t)))
        log.metrics.append({'step': t, 'epoch': epoch, 'lr': lr, 'loss': loss, 'accuracy': acc, 'grad_rate': rate})

    def evaluate(self):
        """
        推理模式下整个训练集的损失与准确率，不改变 BN 运行统计量

        Returns:
            (损失, 准确率；回归任务为 None)
        """
        ft = forward(self.state, self.dataset.inputs, train=False)
        loss, _ = self.loss_fn(ft.output, self.dataset.targets)
        return float(loss), accuracy(ft.output, self.dataset.targets, self.dataset.task)

    def run(self) -> MetricsLog:
        """
        执行 schedule.total_steps 次参数更新

        Returns:
            MetricsLog；发散时 status 为 "diverged"，steps_run 为发散所在步
        """
        cfg = self.config
        log = MetricsLog(cfg.name, cfg.seed)
        batch = cfg.schedule.batch_size
        total = cfg.schedule.total_steps
        n = self.dataset.n
        order = np.arange(n)
        logger.info(f"开始训练 {cfg.name} (seed={cfg.seed}): {total} 步, 批大小 {batch}, "
                    f"微批 {cfg.micro_batch}, 样本 {n}")

        with np.errstate(over='ignore', invalid='ignore', divide='ignore'):
            for t in tqdm(range(total), desc=cfg.name, disable=not cfg.train.progress, leave=False):
                epoch, k = divmod(t, self.steps_per_epoch)
                if k == 0 and cfg.train.shuffle:
                    order = self.shuffle_rng.permutation(n)
                index = order[k * batch:(k + 1) * batch]
                lr = self.optimizer.lr(t)

                loss, acc, grads, norms, traces = self._accumulate(index)
                if not np.isfinite(loss) or any(has_nonfinite(g) for g in grads.values()):
                    log.status = STATUS_DIVERGED
                    log.steps_run = t
                    log.message = f"第 {t} 步损失或梯度非有限 (loss={loss})"
                    log.metrics.append({'step': t, 'epoch': epoch, 'lr': lr, 'loss': loss,
                                        'accuracy': acc, 'grad_rate': float('nan')})
                    logger.warning(f"{cfg.name} 发散: {log.message}")
                    break

                if t % cfg.train.log_every == 0 or t == total - 1:
                    self._log(log, t, epoch, lr, loss, acc, traces)

                applied = self.optimizer.step(self.state, grads, t, per_sample_norms=norms)
                if t % cfg.train.log_every == 0 or t == total - 1:
                    log.steps.extend({'step': t, 'param': name, 'applied_step': step} for name, step in applied.items())
                log.steps_run = t + 1

        if log.status == STATUS_OK:
            with np.errstate(over='ignore', invalid='ignore', divide='ignore'):
                log.final_train_loss, log.final_train_accuracy = self.evaluate()
            if not np.isfinite(log.final_train_loss):
                log.status = STATUS_DIVERGED
                log.message = f"训练集评估损失非有限 (loss={log.final_train_loss})"
                logger.warning(f"{cfg.name} 发散: {log.message}")
                return log
            acc = log.final_train_accuracy
            logger.info(f"{cfg.name} 训练完成: 训练集损失 {log.final_train_loss:.6g}"
                        + (f", 准确率 {acc:.4f}" if acc is not None else ""))
        return log


def train(config: RunConfig, out_dir: Optional[str] = None, dataset: Optional[Dataset] = None) -> MetricsLog:
    """构造 Trainer 并运行；给出 out_dir 时写出全部结果文件"""
    log = Trainer(config, dataset=dataset).run()
    if out_dir is not None:
        log.write(out_dir, config)
    return log
