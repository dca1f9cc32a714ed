"""
ExperimentRunner - 实验编排
probe / hessian / train / sweep 四类命令：构造网络、运行、落盘（CSV + report.json）
sweep 以 asyncio 分批把各次独立运行放到工作线程并发执行，单次失败只记录不中断
"""

import os
import sys
import glob
import json
import asyncio
import logging
from dataclasses import replace
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence, TextIO

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..analytic import explosion_table
from ..config import ConfigManager
from ..config.run_config import RunConfig, load_run_config
from ..diagnostics import (
    gradient_rate,
    hessian_probe,
    injected_probe,
    layer_report,
    loglog_slope,
    write_hessian_csv,
    write_layers_csv,
    write_profile_csv,
    write_schema_csv,
)
from ..errors import ConfigError, DegenerateInputError, GradflowError
from ..network import BN_EPS, BN_MOMENTUM, NetworkState, init_network
from ..tensor_core import ALGORITHM, RngStream, gaussian
from .trainer import STATUS_OK, STREAM_INIT, STREAM_PROBE, MetricsLog, Trainer

logger = logging.getLogger(__name__)

STATUS_ERROR = 'error'


def sample_std(values: Sequence[float]) -> float:
    """样本标准差（ddof=1），先减去首个值再计算，相同的值给出精确的 0"""
    data = np.asarray(values, dtype=np.float64)
    if data.size < 2:
        return float('nan')
    return float(np.std(data - data[0], ddof=1))


def aggregate_runs(runs: pd.DataFrame) -> pd.DataFrame:
    """
    按配置汇总 sweep 结果：成功运行的最终损失/准确率取均值与样本标准差

    Args:
        runs: sweep schema 的逐次运行表

    Returns:
        summary schema 的 DataFrame，配置按首次出现的顺序
    """
    rows = []
    for name in dict.fromkeys(runs['config']):
        group = runs[runs['config'] == name]
        ok = group[group['status'] == STATUS_OK]
        rows.append({
            'config': name,
            'runs': int(len(group)),
            'failed': int(len(group) - len(ok)),
            'loss_mean': float(ok['final_loss'].mean()) if len(ok) else float('nan'),
            'loss_std': sample_std(ok['final_loss']),
            'accuracy_mean': float(ok['final_accuracy'].mean()) if len(ok) else float('nan'),
            'accuracy_std': sample_std(ok['final_accuracy']),
        })
    return pd.DataFrame(rows, columns=['config', 'runs', 'failed', 'loss_mean', 'loss_std',
                                       'accuracy_mean', 'accuracy_std'])


def collect_configs(paths: Sequence[str]) -> List[str]:
    """展开目录（取其中的 *.json，按文件名排序）与单个文件"""
    files: List[str] = []
    for path in paths:
        if os.path.isdir(path):
            files.extend(sorted(glob.glob(os.path.join(path, '*.json'))))
        elif os.path.isfile(path):
            files.append(path)
        else:
            raise ConfigError(f"配置路径不存在: {path}")
    if not files:
        raise ConfigError(f"{list(paths)} 中没有 JSON 配置")
    return files


class ExperimentRunner:
    """实验编排任务"""

    def __init__(self, config_manager: Optional[ConfigManager] = None):
        self.cm = config_manager or ConfigManager()
        network = self.cm.get_network_config()
        self.bn_eps = float(network.get('bn_eps', BN_EPS))
        self.bn_momentum = float(network.get('bn_momentum', BN_MOMENTUM))

    # ---------- 输出目录 ----------

    def output_root(self, config: Optional[RunConfig] = None) -> str:
        """GRADFLOW_OUT > 运行配置 output_dir > config.yaml output.dir"""
        env = os.getenv('GRADFLOW_OUT')
        if env:
            return env
        if config is not None and config.output_dir:
            return config.output_dir
        return self.cm.get_output_config().get('dir', 'out')

    def run_dir(self, config: RunConfig, *suffix: str) -> str:
        path = os.path.join(self.output_root(config), config.name, *suffix)
        os.makedirs(path, exist_ok=True)
        return path

    def _write_report(self, path: str, stats: Dict[str, Any]) -> str:
        report = os.path.join(path, 'report.json')
        with open(report, 'w', encoding='utf-8') as f:
            json.dump(stats, f, ensure_ascii=False, indent=2)
        logger.info(f"报告已保存: {report}")
        return report

    def _init_state(self, config: RunConfig, rng: RngStream, bn_mode=None) -> NetworkState:
        return init_network(
            config.specs, config.init, rng, input_dim=config.input_dim,
            bn_mode=bn_mode or config.bn_mode, train=True,
            bn_eps=self.bn_eps, bn_momentum=self.bn_momentum,
        )

    # ---------- analytic ----------

    def analytic_table(self, r_min: float, r_max: float, steps: int, stream: TextIO = None):
        """把 C(R) 网格表以 analytic schema 写到 stream（默认 stdout）"""
        table = explosion_table(r_min, r_max, steps)
        write_schema_csv(table, stream or sys.stdout, 'analytic')
        return table

    # ---------- probe ----------

    def probe(self, config: RunConfig) -> Dict[str, Any]:
        """
        初始化状态下的一次前向 + 注入输出梯度的反向

        Returns:
            统计信息字典（含输出文件路径）
        """
        start = datetime.utcnow()
        root = RngStream(config.seed)
        probe_rng = root.spawn(STREAM_PROBE)
        batch_size = config.probe.batch_size or int(self.cm.get_probe_config().get('batch_size', 4096))
        state = self._init_state(config, root.spawn(STREAM_INIT), bn_mode=config.probe.mode)
        batch = gaussian(probe_rng, 0.0, 1.0, batch_size, config.input_dim)

        ft, bt, profile = injected_probe(state, batch, probe_rng, mode=config.probe.mode)
        reports = layer_report(ft, bt, state)

        out = self.run_dir(config)
        profile_path = os.path.join(out, 'profile.csv')
        layers_path = os.path.join(out, 'layers.csv')
        write_profile_csv(profile, profile_path)
        write_layers_csv(reports, layers_path)

        rate = gradient_rate(profile)
        stats = {
            'command': 'probe',
            'config': config.name,
            'seed': config.seed,
            'rng': ALGORITHM,
            'start_at': start.isoformat(),
            'batch_size': batch_size,
            'bn_mode': config.probe.mode.value,
            'boundaries': len(profile.var_g),
            'gradient_rate': rate,
            'input_rate': profile.cumulative_rate[0],
            'profile_out': profile_path,
            'layers_out': layers_path,
            'end_at': datetime.utcnow().isoformat(),
        }
        logger.info(f"探针完成 {config.name}: {len(profile.var_g)} 个边界, 几何平均爆炸率 {rate:.4f}, "
                    f"输入处累计 {profile.cumulative_rate[0]:.4g}")
        stats['report_out'] = self._write_report(out, stats)
        return stats

    # ---------- hessian ----------

    def hessian(self, config: RunConfig) -> Dict[str, Any]:
        """Hessian 对角元平方律探针，目标取 N(0, target_std²)"""
        start = datetime.utcnow()
        root = RngStream(config.seed)
        probe_rng = root.spawn(STREAM_PROBE)
        settings = config.hessian
        k = settings.k or int(self.cm.get_probe_config().get('hessian_k', 1000))
        state = self._init_state(config, root.spawn(STREAM_INIT))
        batch = gaussian(probe_rng, 0.0, 1.0, settings.batch_size, config.input_dim)
        targets = gaussian(probe_rng, 0.0, settings.target_std, settings.batch_size, 1)

        samples = hessian_probe(state, batch, probe_rng, k=k, targets=targets)
        try:
            slope = loglog_slope(samples)
        except DegenerateInputError as e:
            logger.warning(f"{config.name}: 无法拟合斜率: {e}")
            slope = None

        out = self.run_dir(config)
        hessian_path = os.path.join(out, 'hessian.csv')
        write_hessian_csv(samples, hessian_path)
        stats = {
            'command': 'hessian',
            'config': config.name,
            'seed': config.seed,
            'rng': ALGORITHM,
            'start_at': start.isoformat(),
            'layers': len(samples),
            'k': k,
            'loglog_slope': slope,
            'hessian_out': hessian_path,
            'end_at': datetime.utcnow().isoformat(),
        }
        if slope is not None:
            logger.info(f"Hessian 探针完成 {config.name}: {len(samples)} 层, log-log 斜率 {slope:.4f}")
        stats['report_out'] = self._write_report(out, stats)
        return stats

    # ---------- train ----------

    def train(self, config: RunConfig, out_dir: Optional[str] = None) -> MetricsLog:
        trainer = Trainer(config, bn_eps=self.bn_eps, bn_momentum=self.bn_momentum)
        log = trainer.run()
        log.write(out_dir or self.run_dir(config), config)
        return log

    # ---------- sweep ----------

    def _sweep_run(self, config: RunConfig) -> Dict[str, Any]:
        row = {'config': config.name, 'seed': config.seed, 'status': STATUS_ERROR,
               'final_loss': float('nan'), 'final_accuracy': float('nan'), 'steps_run': 0, 'message': ''}
        try:
            quiet = replace(config, train=replace(config.train, progress=False))
            log = self.train(quiet, out_dir=self.run_dir(config, f"seed_{config.seed}"))
            row.update(status=log.status, final_loss=log.reported_loss, final_accuracy=log.reported_accuracy,
                       steps_run=log.steps_run, message=log.message)
        except GradflowError as e:
            row['message'] = str(e)
            logger.error(f"sweep 运行失败 {config.name} seed={config.seed}: {e}")
        except Exception as e:
            row['message'] = f"{type(e).__name__}: {e}"
            logger.exception(f"sweep 运行异常 {config.name} seed={config.seed}")
        return row

    async def _sweep_async(self, configs: List[RunConfig], max_workers: int) -> List[Dict[str, Any]]:
        rows: List[Dict[str, Any]] = []
        with tqdm(total=len(configs), desc='sweep') as bar:
            for i in range(0, len(configs), max_workers):
                chunk = configs[i:i + max_workers]
                results = await asyncio.gather(*(asyncio.to_thread(self._sweep_run, c) for c in chunk))
                rows.extend(results)
                bar.update(len(chunk))
        return rows

    def sweep(self, paths: Sequence[str], seeds: int = 3, max_workers: Optional[int] = None) -> Dict[str, Any]:
        """
        对每个配置运行 seeds 次（种子 seed, seed+1, ...），汇总最终指标

        Args:
            paths: 配置文件或目录
            seeds: 每个配置的重复次数
            max_workers: 并发线程数，缺省取 config.yaml sweep.max_workers

        Returns:
            统计信息字典（含 runs / summary 两张表的路径）
        """
        if seeds < 1:
            raise ConfigError(f"seeds 必须 >= 1，实际 {seeds}")
        start = datetime.utcnow()
        workers = max_workers or int(self.cm.get_sweep_config().get('max_workers', 1))
        base = [load_run_config(p) for p in collect_configs(paths)]
        for config in base:
            config.require_training()
        configs = [c.with_seed(c.seed + i) for c in base for i in range(seeds)]
        logger.info(f"sweep: {len(base)} 个配置 × {seeds} 个种子，并发 {workers}")

        rows = asyncio.run(self._sweep_async(configs, max(1, workers)))
        runs = pd.DataFrame(rows, columns=['config', 'seed', 'status', 'final_loss', 'final_accuracy',
                                           'steps_run', 'message'])
        summary = aggregate_runs(runs)

        roots = {self.output_root(c) for c in base}
        out = os.path.join(roots.pop() if len(roots) == 1 else self.output_root(), 'sweep')
        os.makedirs(out, exist_ok=True)
        runs_path = os.path.join(out, 'sweep.csv')
        summary_path = os.path.join(out, 'summary.csv')
        write_schema_csv(runs, runs_path, 'sweep')
        write_schema_csv(summary, summary_path, 'summary')

        stats = {
            'command': 'sweep',
            'start_at': start.isoformat(),
            'configs': [c.name for c in base],
            'seeds': seeds,
            'runs': len(runs),
            'failed': int((runs['status'] != STATUS_OK).sum()),
            'runs_out': runs_path,
            'summary_out': summary_path,
            'end_at': datetime.utcnow().isoformat(),
        }
        stats['report_out'] = self._write_report(out, stats)
        stats['runs_frame'] = runs
        stats['summary_frame'] = summary
        return stats
