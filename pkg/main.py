#!/usr/bin/env python3
"""
gradflow 主入口
支持：
- analytic：输出 C(R) 解析表（CSV 到 stdout）
- probe：初始化状态下的梯度爆炸剖面
- hessian：Hessian 对角元平方律探针
- train：按运行配置训练一次
- sweep：多配置 × 多种子的训练汇总
"""

import argparse
import logging
import math
import os
import sys
from typing import List, Optional

# 让本地包可导入
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.config import ConfigManager, load_run_config, setup_logging
from src.errors import ConfigError, DomainError, GradflowError
from src.harness import ExperimentRunner

logger = logging.getLogger("main")

EXIT_OK = 0
EXIT_DIVERGED = 4


def _print_stats(title: str, stats: dict):
    print(f"\n{title}")
    for k, v in stats.items():
        if k.endswith('_frame'):
            continue
        print(f"- {k}: {v}")


def cmd_analytic(args, runner: ExperimentRunner) -> int:
    r_min, r_max, steps = args.table
    if not math.isfinite(steps) or steps != int(steps):
        raise ConfigError(f"steps 必须是整数，实际 {steps}")
    try:
        runner.analytic_table(r_min, r_max, int(steps), stream=sys.stdout)
    except DomainError as e:
        raise ConfigError(f"--table 参数不合法: {e}") from e
    return EXIT_OK


def cmd_probe(args, runner: ExperimentRunner) -> int:
    stats = runner.probe(load_run_config(args.config))
    _print_stats("✅ 探针完成：", stats)
    return EXIT_OK


def cmd_hessian(args, runner: ExperimentRunner) -> int:
    stats = runner.hessian(load_run_config(args.config))
    _print_stats("✅ Hessian 探针完成：", stats)
    return EXIT_OK


def cmd_train(args, runner: ExperimentRunner) -> int:
    config = load_run_config(args.config)
    log = runner.train(config)
    if log.diverged:
        print(f"\n⚠️ 训练发散：{log.message}")
        return EXIT_DIVERGED
    _print_stats("✅ 训练完成：", log.summary())
    return EXIT_OK


def cmd_sweep(args, runner: ExperimentRunner) -> int:
    seeds = args.seeds if args.seeds is not None else int(runner.cm.get_sweep_config().get('seeds', 3))
    stats = runner.sweep(args.configs, seeds=seeds, max_workers=args.workers)
    _print_stats("✅ sweep 完成：", stats)
    summary = stats['summary_frame']
    if not summary.empty:
        print("\n📊 汇总：")
        print(summary.to_string(index=False))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="gradflow", description="BN 网络梯度爆炸分析与大批量逐层自适应训练")
    parser.add_argument("-v", "--verbose", action="store_true", help="输出 DEBUG 级别日志")
    parser.add_argument("--settings", type=str, default=None, help="应用配置文件（默认 config.yaml）")
    sub = parser.add_subparsers(dest="command")

    p1 = sub.add_parser("analytic", help="输出 C(R) 解析表")
    p1.add_argument("--table", type=float, nargs=3, required=True, metavar=("R_MIN", "R_MAX", "STEPS"),
                    help="网格范围与点数，如 --table -6 6 121")
    p1.set_defaults(func=cmd_analytic)

    for name, func, text in (
        ("probe", cmd_probe, "初始化状态下的爆炸剖面"),
        ("hessian", cmd_hessian, "Hessian 对角元平方律探针"),
        ("train", cmd_train, "按运行配置训练（发散时退出码 4）"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=str, required=True, help="JSON 运行配置路径")
        p.set_defaults(func=func)

    p5 = sub.add_parser("sweep", help="多配置 × 多种子训练并汇总")
    p5.add_argument("--configs", type=str, nargs="+", required=True, help="配置目录或文件")
    p5.add_argument("--seeds", type=int, default=None, help="每个配置的种子数，默认取 config.yaml sweep.seeds")
    p5.add_argument("--workers", type=int, default=None, help="并发线程数，默认取 sweep.max_workers")
    p5.set_defaults(func=cmd_sweep)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_OK

    cm = ConfigManager.reload(args.settings) if args.settings else ConfigManager()
    setup_logging(cm, level="DEBUG" if args.verbose else None)
    if args.verbose:
        cm.display_config()
    try:
        return args.func(args, ExperimentRunner(cm))
    except GradflowError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"\n❌ {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
