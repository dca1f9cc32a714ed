"""
带版本标记的 CSV 输出
第一行为 "# schema: gradflow.<kind>/v1"，其后为表头与数据；浮点数统一 %.17g，保证重跑逐字节一致
"""

import os
import logging
from typing import List, Tuple

import pandas as pd

from ..errors import FormatError
from .hessian import HessianSample, samples_to_frame
from .profile import ExplosionProfile
from .reports import LayerReport, reports_to_frame

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 'v1'
SCHEMA_PREFIX = '# schema: gradflow.'

SCHEMAS = {
    'profile': ['layer', 'var_g', 'per_layer_ratio', 'cumulative_rate'],
    'layers': ['layer', 'step', 'var_x', 'var_g', 'var_w', 'mean_std_ratio', 'corr_xg', 'corr_xx'],
    'hessian': ['layer', 'grad_norm', 'hess_norm'],
    'train_profile': ['step', 'layer', 'var_g', 'per_layer_ratio', 'cumulative_rate'],
    'metrics': ['step', 'epoch', 'lr', 'loss', 'accuracy', 'grad_rate'],
    'steps': ['step', 'param', 'applied_step'],
    'analytic': ['r', 'c_r', 'sqrt_c_r'],
    'sweep': ['config', 'seed', 'status', 'final_loss', 'final_accuracy', 'steps_run', 'message'],
    'summary': ['config', 'runs', 'failed', 'loss_mean', 'loss_std', 'accuracy_mean', 'accuracy_std'],
}


def schema_tag(kind: str) -> str:
    return f"{SCHEMA_PREFIX}{kind}/{SCHEMA_VERSION}"


def write_schema_csv(df: pd.DataFrame, path, kind: str, append: bool = False):
    """
    写出带 schema 标记的 CSV

    Args:
        df: 数据（列顺序必须与 schema 一致）
        path: 文件路径或已打开的文本流
        kind: schema 名称
        append: 追加模式（文件已存在时不再写标记与表头）
    """
    expected = SCHEMAS[kind]
    if list(df.columns) != expected:
        raise FormatError(f"{kind} 列 {list(df.columns)} 与 schema {expected} 不一致")

    if hasattr(path, 'write'):
        path.write(schema_tag(kind) + '\n')
        df.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
        return

    exists = append and os.path.exists(path) and os.path.getsize(path) > 0
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'a' if exists else 'w', encoding='utf-8', newline='') as f:
        if not exists:
            f.write(schema_tag(kind) + '\n')
        df.to_csv(f, index=False, header=not exists, float_format='%.17g', lineterminator='\n')
    logger.debug(f"已写出 {kind}: {path} ({len(df)} 行)")


def read_schema_csv(path: str) -> Tuple[str, pd.DataFrame]:
    """读取带 schema 标记的 CSV，返回 (kind, DataFrame)"""
    with open(path, 'r', encoding='utf-8') as f:
        first = f.readline().rstrip('\n')
        if not first.startswith(SCHEMA_PREFIX):
            raise FormatError(f"{path} 缺少 schema 标记", row=1)
        kind = first[len(SCHEMA_PREFIX):].rsplit('/', 1)[0]
        df = pd.read_csv(f)
    return kind, df


def write_profile_csv(profile: ExplosionProfile, path: str):
    write_schema_csv(profile.to_frame(), path, 'profile')


def write_layers_csv(reports: List[LayerReport], path: str, append: bool = False):
    write_schema_csv(reports_to_frame(reports), path, 'layers', append=append)


def write_hessian_csv(samples: List[HessianSample], path: str):
    write_schema_csv(samples_to_frame(samples), path, 'hessian')
