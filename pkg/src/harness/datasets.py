"""
数据集
合成高斯多分类、线性回归，以及 IDX / CSV 文件读取
"""

import os
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

from ..config.run_config import DatasetSpec
from ..errors import ConfigError, DomainError, FormatError, ShapeError
from ..tensor_core import RngStream, gaussian

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    """
    inputs: N × d_in
    targets: 分类为长度 N 的整数类别，回归为 N × d_out
    """
    inputs: np.ndarray
    targets: np.ndarray
    task: str
    classes: Optional[int] = None
    feature_names: List[str] = field(default_factory=list)
    target_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.task not in ('classification', 'regression'):
            raise DomainError(f"未知任务类型: {self.task}")
        if self.inputs.ndim != 2:
            raise ShapeError(f"inputs 必须是二维矩阵，实际 {self.inputs.shape}")
        n = self.inputs.shape[0]
        if self.targets.shape[0] != n:
            raise ShapeError(f"targets 行数 {self.targets.shape[0]} 与 inputs 行数 {n} 不一致")
        if not np.all(np.isfinite(self.inputs)):
            raise DomainError("inputs 含非有限值")
        if self.task == 'classification':
            self.targets = self.targets.astype(np.int64).reshape(-1)
            if self.classes is None:
                self.classes = int(self.targets.max()) + 1 if n else 0
            if n and (self.targets.min() < 0 or self.targets.max() >= self.classes):
                raise DomainError(f"类别编号必须位于 [0, {self.classes})")
        else:
            if self.targets.ndim == 1:
                self.targets = self.targets.reshape(-1, 1)
            if not np.all(np.isfinite(self.targets)):
                raise DomainError("targets 含非有限值")
        if not self.feature_names:
            self.feature_names = [f"x{i}" for i in range(self.inputs.shape[1])]
        if not self.target_names:
            self.target_names = ['label'] if self.task == 'classification' else \
                [f"y{j}" for j in range(self.targets.shape[1])]

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def output_dim(self) -> int:
        return self.classes if self.task == 'classification' else self.targets.shape[1]

    def batch(self, index: np.ndarray):
        return self.inputs[index], self.targets[index]

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, dim={self.input_dim}, task={self.task}, outputs={self.output_dim})"


def synth_gaussian_classes(
    rng: RngStream,
    classes: int,
    per_class: int,
    dim: int,
    class_sep: float,
) -> Dataset:
    """
    高斯多分类：第 c 类中心为 class_sep·μ_c，μ_c 为随机正交单位向量，噪声为单位各向同性

    Args:
        rng: 随机数流
        classes: 类别数（>= 2）
        per_class: 每类样本数
        dim: 维度（>= classes，保证中心两两正交）
        class_sep: 类间距（0 时标签不含信息）

    Returns:
        打乱顺序后的 Dataset
    """
    if classes < 2 or per_class < 1:
        raise DomainError(f"classes 必须 >= 2、per_class 必须 >= 1，实际 {classes}, {per_class}")
    if class_sep < 0:
        raise DomainError(f"class_sep 必须 >= 0，实际 {class_sep}")
    if dim < classes:
        raise DomainError(f"正交类中心要求 dim >= classes，实际 dim={dim}, classes={classes}")

    q, _ = np.linalg.qr(gaussian(rng, 0.0, 1.0, dim, classes))
    centers = class_sep * q.T
    labels = np.repeat(np.arange(classes), per_class)
    inputs = centers[labels] + gaussian(rng, 0.0, 1.0, labels.size, dim)
    order = rng.permutation(labels.size)
    dataset = Dataset(np.ascontiguousarray(inputs[order]), labels[order], 'classification', classes)
    logger.debug(f"合成分类数据: {dataset!r}, class_sep={class_sep}")
    return dataset


def synth_regression(
    rng: RngStream,
    n: int,
    dim: int,
    noise: float = 0.1,
    out_dim: int = 1,
    scale: float = 1.0,
) -> Dataset:
    """
    线性教师回归：y = scale·x·W* + noise·ε，x ~ N(0, I)，W* ~ N(0, 1/dim)
    """
    if n < 1 or dim < 1 or out_dim < 1:
        raise DomainError(f"n、dim、out_dim 必须为正，实际 {n}, {dim}, {out_dim}")
    if noise < 0 or scale < 0:
        raise DomainError(f"noise / scale 必须 >= 0，实际 {noise}, {scale}")
    inputs = gaussian(rng, 0.0, 1.0, n, dim)
    true_weights = gaussian(rng, 0.0, 1.0 / np.sqrt(dim), dim, out_dim)
    targets = scale * (inputs @ true_weights) + gaussian(rng, 0.0, noise, n, out_dim)
    return Dataset(inputs, targets, 'regression')


# ---------- IDX ----------

def _read_idx(path: str, expected_magic: int, ndim: int) -> np.ndarray:
    if not os.path.isfile(path):
        raise FormatError(f"{path}: 文件不存在")
    with open(path, 'rb') as f:
        raw = f.read()
    header = 4 + 4 * ndim
    if len(raw) < 4:
        raise FormatError(f"{path}: 文件过短，无法读取 magic", offset=len(raw))
    magic = int(np.frombuffer(raw[:4], dtype='>u4')[0])
    if magic != expected_magic:
        raise FormatError(f"{path}: magic 0x{magic:08x}，期望 0x{expected_magic:08x}", offset=0)
    if len(raw) < header:
        raise FormatError(f"{path}: 头部不完整", offset=len(raw))
    dims = [int(d) for d in np.frombuffer(raw[4:header], dtype='>u4')]
    count = int(np.prod(dims))
    body = len(raw) - header
    if body != count:
        raise FormatError(f"{path}: 维度 {dims} 需要 {count} 字节数据，实际 {body}", offset=header + min(body, count))
    return np.frombuffer(raw[header:], dtype=np.uint8).reshape(dims)


def load_idx_images(path: str) -> np.ndarray:
    """读取 IDX 图像文件，展平成 N × (rows·cols) 并缩放到 [0,1]"""
    images = _read_idx(path, IDX_IMAGES_MAGIC, 3)
    return images.reshape(images.shape[0], -1).astype(np.float64) / 255.0


def load_idx_labels(path: str) -> np.ndarray:
    return _read_idx(path, IDX_LABELS_MAGIC, 1).astype(np.int64)


def load_idx(images_path: str, labels_path: str) -> Dataset:
    """
    读取 IDX 图像 + 标签

    Raises:
        FormatError: magic / 形状错误（带字节偏移），或图像与标签数量不一致
    """
    inputs = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if labels.shape[0] != inputs.shape[0]:
        raise FormatError(f"{labels_path}: 标签数 {labels.shape[0]} 与图像数 {inputs.shape[0]} 不一致", offset=4)
    return Dataset(inputs, labels, 'classification')


# ---------- CSV ----------

def _to_float(text: str) -> float:
    """逐单元格用 float() 解析，保证与 %.17g 写出的值逐位一致；无法解析时返回 NaN"""
    try:
        return float(text)
    except ValueError:
        return float('nan')


def load_csv(path: str, label_col: str, task: str = 'classification') -> Dataset:
    """
    读取带表头的 CSV，label_col 为目标列，其余为特征

    Raises:
        FormatError: 缺少目标列、单元格非数值（给出文件行号与列名）、分类标签非整数
    """
    if not os.path.isfile(path):
        raise FormatError(f"{path}: 文件不存在")
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise FormatError(f"{path}: 无法解析 CSV: {e}") from e
    if label_col not in raw.columns:
        raise FormatError(f"{path}: 缺少标签列", row=1, column=label_col)

    values = {}
    for column in raw.columns:
        parsed = raw[column].str.strip().map(_to_float)
        bad = parsed.isna()
        if bad.any():
            index = int(np.flatnonzero(bad.to_numpy())[0])
            # 表头占第 1 行
            raise FormatError(f"{path}: 非数值单元格 {raw[column].iloc[index]!r}", row=index + 2, column=column)
        values[column] = parsed.to_numpy(dtype=np.float64)

    features = [c for c in raw.columns if c != label_col]
    inputs = np.column_stack([values[c] for c in features]) if features else np.empty((len(raw), 0))
    target = values[label_col]
    if task == 'classification':
        if not np.all(target == np.round(target)):
            index = int(np.flatnonzero(target != np.round(target))[0])
            raise FormatError(f"{path}: 分类标签必须是整数", row=index + 2, column=label_col)
        return Dataset(inputs, target.astype(np.int64), task, feature_names=features, target_names=[label_col])
    return Dataset(inputs, target.reshape(-1, 1), task, feature_names=features, target_names=[label_col])


def write_csv(dataset: Dataset, path: str):
    """load_csv 的逆操作：特征列在前，目标列在后，浮点 %.17g"""
    frame = pd.DataFrame(dataset.inputs, columns=dataset.feature_names)
    if dataset.task == 'classification':
        frame[dataset.target_names[0]] = dataset.targets
    else:
        for j, name in enumerate(dataset.target_names):
            frame[name] = dataset.targets[:, j]
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')


# ---------- 由配置构造 ----------

def build_dataset(spec: DatasetSpec, rng: RngStream) -> Dataset:
    """
    按描述构造数据集；spec.seed 给出时忽略传入的 rng

    Raises:
        ConfigError: 合成参数不合法
        FormatError: 文件数据格式错误
    """
    if spec.seed is not None:
        rng = RngStream(spec.seed)
    p = spec.params
    try:
        if spec.kind == 'gaussian_classes':
            return synth_gaussian_classes(rng, p['classes'], p['per_class'], p['dim'], p['class_sep'])
        if spec.kind == 'regression':
            return synth_regression(rng, p['n'], p['dim'], p['noise'], p['out_dim'], p['scale'])
    except DomainError as e:
        raise ConfigError(f"dataset: {e}") from e
    if spec.kind == 'idx':
        return load_idx(p['images'], p['labels'])
    return load_csv(p['path'], p['label_col'], p['task'])
