"""
运行配置
单次实验的 JSON 描述（version 1）。每一层对象都严格校验：未知字段、类型错误、缺失字段、
字段之间不一致都在任何计算开始之前抛出 ConfigError。
"""

import os
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

from ..errors import ConfigError, DomainError, ShapeError
from ..network import (
    ActivationKind,
    BNMode,
    InitScheme,
    LayerSpec,
    build_stack,
    chain_dims,
    spec_to_dict,
    specs_from_list,
)
from ..network.specs import infer_input_dim
from ..optimizers import OptimizerSpec, ScheduleSpec

logger = logging.getLogger(__name__)

CONFIG_VERSION = 1


# ---------- 字段读取 ----------

def _check_keys(data: Any, allowed: Sequence[str], where: str, required: Sequence[str] = ()) -> Dict[str, Any]:
    if not isinstance(data, dict):
        raise ConfigError(f"{where} 必须是对象，实际 {type(data).__name__}")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"{where} 包含未知字段: {sorted(unknown)}")
    for key in required:
        if key not in data:
            raise ConfigError(f"{where} 缺少字段 '{key}'")
    return data


def _int(data: Dict[str, Any], key: str, where: str, default: Any = None, minimum: Optional[int] = None) -> Any:
    value = data.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}.{key} 必须是整数，实际 {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}.{key} 必须 >= {minimum}，实际 {value}")
    return value


def _num(data: Dict[str, Any], key: str, where: str, default: Any = None, minimum: Optional[float] = None) -> Any:
    value = data.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key} 必须是数值，实际 {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}.{key} 必须 >= {minimum}，实际 {value}")
    return float(value)


def _bool(data: Dict[str, Any], key: str, where: str, default: bool) -> bool:
    value = data.get(key, default)
    if not isinstance(value, bool):
        raise ConfigError(f"{where}.{key} 必须是布尔值，实际 {value!r}")
    return value


def _str(data: Dict[str, Any], key: str, where: str, default: Any = None, choices: Sequence[str] = ()) -> Any:
    value = data.get(key, default)
    if value is None:
        return None
    if not isinstance(value, str):
        raise ConfigError(f"{where}.{key} 必须是字符串，实际 {value!r}")
    if choices and value not in choices:
        raise ConfigError(f"{where}.{key} 必须是 {list(choices)} 之一，实际 {value!r}")
    return value


# ---------- 数据集描述 ----------

DATASET_KEYS = {
    'gaussian_classes': ('kind', 'classes', 'per_class', 'dim', 'class_sep', 'seed'),
    'regression': ('kind', 'n', 'dim', 'out_dim', 'noise', 'scale', 'seed'),
    'idx': ('kind', 'images', 'labels'),
    'csv': ('kind', 'path', 'label_col', 'task'),
}


@dataclass(frozen=True)
class DatasetSpec:
    """
    数据集描述

    合成数据的形状在配置阶段已知，可以提前做交叉校验；文件数据在加载后校验。
    seed 给出时数据集与运行种子无关（sweep 的各次重复共享同一份数据）。
    """
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None

    @property
    def task(self) -> str:
        if self.kind == 'gaussian_classes' or self.kind == 'idx':
            return 'classification'
        if self.kind == 'regression':
            return 'regression'
        return self.params.get('task', 'classification')

    @property
    def dim(self) -> Optional[int]:
        return self.params.get('dim')

    @property
    def size(self) -> Optional[int]:
        if self.kind == 'gaussian_classes':
            return self.params['classes'] * self.params['per_class']
        if self.kind == 'regression':
            return self.params['n']
        return None

    @property
    def output_dim(self) -> Optional[int]:
        if self.kind == 'gaussian_classes':
            return self.params['classes']
        if self.kind == 'regression':
            return self.params['out_dim']
        return None

    def to_dict(self) -> Dict[str, Any]:
        data = {'kind': self.kind, **self.params}
        if self.seed is not None:
            data['seed'] = self.seed
        return data

    @classmethod
    def from_dict(cls, data: Any, where: str = "dataset") -> "DatasetSpec":
        if not isinstance(data, dict):
            raise ConfigError(f"{where} 必须是对象")
        kind = data.get('kind')
        if kind not in DATASET_KEYS:
            raise ConfigError(f"{where}.kind 未知: {kind!r}，可选 {sorted(DATASET_KEYS)}")
        _check_keys(data, DATASET_KEYS[kind], where)

        if kind == 'gaussian_classes':
            _check_keys(data, DATASET_KEYS[kind], where, required=('classes', 'per_class', 'dim'))
            params = {
                'classes': _int(data, 'classes', where, minimum=2),
                'per_class': _int(data, 'per_class', where, minimum=1),
                'dim': _int(data, 'dim', where, minimum=1),
                'class_sep': _num(data, 'class_sep', where, default=1.0, minimum=0.0),
            }
        elif kind == 'regression':
            _check_keys(data, DATASET_KEYS[kind], where, required=('n', 'dim'))
            params = {
                'n': _int(data, 'n', where, minimum=1),
                'dim': _int(data, 'dim', where, minimum=1),
                'out_dim': _int(data, 'out_dim', where, default=1, minimum=1),
                'noise': _num(data, 'noise', where, default=0.1, minimum=0.0),
                'scale': _num(data, 'scale', where, default=1.0, minimum=0.0),
            }
        elif kind == 'idx':
            _check_keys(data, DATASET_KEYS[kind], where, required=('images', 'labels'))
            params = {'images': _str(data, 'images', where), 'labels': _str(data, 'labels', where)}
        else:
            _check_keys(data, DATASET_KEYS[kind], where, required=('path', 'label_col'))
            params = {
                'path': _str(data, 'path', where),
                'label_col': _str(data, 'label_col', where),
                'task': _str(data, 'task', where, default='classification',
                             choices=('classification', 'regression')),
            }
        return cls(kind, params, _int(data, 'seed', where, minimum=0))


# ---------- 分节设置 ----------

@dataclass(frozen=True)
class TrainSettings:
    """micro_batch 为 None 时不做梯度累积"""
    micro_batch: Optional[int] = None
    log_every: int = 10
    shuffle: bool = True
    progress: bool = True

    @classmethod
    def from_dict(cls, data: Any, where: str = "train") -> "TrainSettings":
        _check_keys(data, ('micro_batch', 'log_every', 'shuffle', 'progress'), where)
        return cls(
            micro_batch=_int(data, 'micro_batch', where, minimum=1),
            log_every=_int(data, 'log_every', where, default=10, minimum=1),
            shuffle=_bool(data, 'shuffle', where, True),
            progress=_bool(data, 'progress', where, True),
        )


@dataclass(frozen=True)
class ProbeSettings:
    """batch_size 为 None 时取 config.yaml probe.batch_size"""
    batch_size: Optional[int] = None
    mode: BNMode = BNMode.FROZEN

    @classmethod
    def from_dict(cls, data: Any, where: str = "probe") -> "ProbeSettings":
        _check_keys(data, ('batch_size', 'mode'), where)
        mode = _str(data, 'mode', where, default='frozen', choices=[m.value for m in BNMode])
        return cls(batch_size=_int(data, 'batch_size', where, minimum=2), mode=BNMode(mode))


@dataclass(frozen=True)
class HessianSettings:
    """target_std：回归目标 N(0, target_std²) 的标准差；k 为 None 时取 config.yaml probe.hessian_k"""
    batch_size: int = 512
    k: Optional[int] = None
    target_std: float = 10.0

    @classmethod
    def from_dict(cls, data: Any, where: str = "hessian") -> "HessianSettings":
        _check_keys(data, ('batch_size', 'k', 'target_std'), where)
        return cls(
            batch_size=_int(data, 'batch_size', where, default=512, minimum=2),
            k=_int(data, 'k', where, minimum=1),
            target_std=_num(data, 'target_std', where, default=10.0, minimum=0.0),
        )


# ---------- 网络 ----------

STACK_KEYS = ('depth', 'width', 'input_dim', 'activation', 'residual', 'bn_beta', 'head')


def _activation_from(value: Any, where: str) -> ActivationKind:
    if isinstance(value, str):
        return ActivationKind.from_dict({'kind': value})
    if isinstance(value, dict):
        _check_keys(value, ('kind', 'alpha', 'p'), where)
        return ActivationKind.from_dict(value)
    raise ConfigError(f"{where} 必须是激活名或对象，实际 {value!r}")


def _network_from(data: Any, where: str = "network"):
    """返回 (specs, input_dim)"""
    _check_keys(data, ('layers', 'stack', 'input_dim'), where)
    if ('layers' in data) == ('stack' in data):
        raise ConfigError(f"{where} 必须且只能给出 layers 或 stack 之一")
    input_dim = _int(data, 'input_dim', where, minimum=1)

    if 'layers' in data:
        specs = specs_from_list(data['layers'])
        if input_dim is None:
            input_dim = infer_input_dim(specs)
        if input_dim is None:
            raise ConfigError(f"{where} 无法推断输入维度，请给出 input_dim")
        return specs, input_dim

    stack = _check_keys(data['stack'], STACK_KEYS, f"{where}.stack", required=('depth', 'width'))
    w = f"{where}.stack"
    activation = _activation_from(stack['activation'], f"{w}.activation") if 'activation' in stack else None
    stack_input = _int(stack, 'input_dim', w, minimum=1)
    if input_dim is not None and stack_input is not None and input_dim != stack_input:
        raise ConfigError(f"{where}.input_dim ({input_dim}) 与 stack.input_dim ({stack_input}) 不一致")
    try:
        specs = build_stack(
            depth=_int(stack, 'depth', w, minimum=0),
            width=_int(stack, 'width', w, minimum=1),
            input_dim=stack_input or input_dim,
            activation=activation,
            residual=_bool(stack, 'residual', w, False),
            bn_beta=_num(stack, 'bn_beta', w, default=0.0),
            head=_int(stack, 'head', w, minimum=1),
        )
    except (ShapeError, DomainError) as e:
        raise ConfigError(f"{w}: {e}") from e
    return specs, stack_input or input_dim or stack['width']


# ---------- 运行配置 ----------

TOP_KEYS = (
    'version', 'name', 'seed', 'network', 'init', 'bn_mode', 'dataset',
    'optimizer', 'schedule', 'train', 'probe', 'hessian', 'output_dir',
)


@dataclass(frozen=True)
class RunConfig:
    """
    一次运行的完整描述：相同的 RunConfig => 逐位相同的输出

    optimizer / schedule / dataset 只有 train 需要；probe / hessian 只用网络与初始化
    """
    name: str
    seed: int
    specs: List[LayerSpec]
    input_dim: int
    output_dim: int
    init: InitScheme = InitScheme('he')
    bn_mode: BNMode = BNMode.EXACT
    dataset: Optional[DatasetSpec] = None
    optimizer: Optional[OptimizerSpec] = None
    schedule: Optional[ScheduleSpec] = None
    train: TrainSettings = TrainSettings()
    probe: ProbeSettings = ProbeSettings()
    hessian: HessianSettings = HessianSettings()
    output_dir: Optional[str] = None
    version: int = CONFIG_VERSION

    @property
    def micro_batch(self) -> int:
        if self.schedule is None:
            raise ConfigError(f"{self.name}: 缺少 schedule")
        return self.train.micro_batch or self.schedule.batch_size

    @property
    def accumulation_steps(self) -> int:
        return self.schedule.batch_size // self.micro_batch

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed)

    def require_training(self):
        """train 命令所需的字段与交叉校验"""
        missing = [k for k in ('dataset', 'optimizer', 'schedule') if getattr(self, k) is None]
        if missing:
            raise ConfigError(f"{self.name}: 训练需要字段 {missing}")
        batch = self.schedule.batch_size
        if batch % self.micro_batch != 0:
            raise ConfigError(f"{self.name}: micro_batch {self.micro_batch} 不能整除 batch_size {batch}")
        size = self.dataset.size
        if size is not None and size < batch:
            raise ConfigError(f"{self.name}: 数据集样本数 {size} 小于 batch_size {batch}")
        self.check_dataset_shape(self.dataset.dim, self.dataset.output_dim)

    def check_dataset_shape(self, dim: Optional[int], output_dim: Optional[int]):
        if dim is not None and dim != self.input_dim:
            raise ConfigError(f"{self.name}: 网络输入维度 {self.input_dim} 与数据维度 {dim} 不一致")
        if output_dim is not None and output_dim != self.output_dim:
            raise ConfigError(f"{self.name}: 网络输出维度 {self.output_dim} 与数据目标维度 {output_dim} 不一致")

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            'version': self.version,
            'name': self.name,
            'seed': self.seed,
            'network': {'input_dim': self.input_dim, 'layers': [spec_to_dict(s) for s in self.specs]},
            'init': {'scheme': self.init.kind, 'sigma': self.init.sigma},
            'bn_mode': self.bn_mode.value,
        }
        if self.dataset is not None:
            data['dataset'] = self.dataset.to_dict()
        if self.optimizer is not None:
            data['optimizer'] = self.optimizer.to_dict()
        if self.schedule is not None:
            data['schedule'] = self.schedule.to_dict()
        if self.output_dir is not None:
            data['output_dir'] = self.output_dir
        return data

    @classmethod
    def from_dict(cls, data: Any, name: str = "run") -> "RunConfig":
        """
        解析并校验运行配置

        Raises:
            ConfigError: 任何字段或字段组合不合法
        """
        _check_keys(data, TOP_KEYS, "config", required=('version', 'seed', 'network'))
        version = _int(data, 'version', "config")
        if version != CONFIG_VERSION:
            raise ConfigError(f"不支持的配置版本 {version}，当前版本 {CONFIG_VERSION}")
        seed = _int(data, 'seed', "config", minimum=0)
        name = _str(data, 'name', "config", default=name)

        specs, input_dim = _network_from(data['network'])
        try:
            output_dim = chain_dims(specs, input_dim)
        except ShapeError as e:
            raise ConfigError(f"network: {e}") from e

        bn_mode = _str(data, 'bn_mode', "config", default='exact', choices=[m.value for m in BNMode])
        optimizer = OptimizerSpec.from_dict(data['optimizer']) if 'optimizer' in data else None
        schedule = ScheduleSpec.from_dict(data['schedule']) if 'schedule' in data else None
        if (optimizer is None) != (schedule is None):
            raise ConfigError("optimizer 与 schedule 必须同时给出")

        config = cls(
            name=name,
            seed=seed,
            specs=specs,
            input_dim=input_dim,
            output_dim=output_dim,
            init=InitScheme.from_dict(_check_keys(data.get('init', {}), ('scheme', 'sigma'), "init")),
            bn_mode=BNMode(bn_mode),
            dataset=DatasetSpec.from_dict(data['dataset']) if 'dataset' in data else None,
            optimizer=optimizer,
            schedule=schedule,
            train=TrainSettings.from_dict(data.get('train', {})),
            probe=ProbeSettings.from_dict(data.get('probe', {})),
            hessian=HessianSettings.from_dict(data.get('hessian', {})),
            output_dir=_str(data, 'output_dir', "config"),
            version=version,
        )
        if config.schedule is not None:
            if config.train.micro_batch is not None and config.schedule.batch_size % config.train.micro_batch:
                raise ConfigError(
                    f"micro_batch {config.train.micro_batch} 不能整除 batch_size {config.schedule.batch_size}")
            if config.dataset is not None and config.dataset.size is not None \
                    and config.dataset.size < config.schedule.batch_size:
                raise ConfigError(
                    f"数据集样本数 {config.dataset.size} 小于 batch_size {config.schedule.batch_size}")
        if config.dataset is not None:
            config.check_dataset_shape(config.dataset.dim, config.dataset.output_dim)
        return config


def load_run_config(path: str) -> RunConfig:
    """
    读取 JSON 运行配置，缺省 name 为文件名（不含扩展名）

    Raises:
        ConfigError: 文件不存在、JSON 语法错误或内容不合法
    """
    if not os.path.isfile(path):
        raise ConfigError(f"配置文件不存在: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} 不是合法 JSON: 第 {e.lineno} 行第 {e.colno} 列 {e.msg}") from e
    name = os.path.splitext(os.path.basename(path))[0]
    config = RunConfig.from_dict(data, name=name)
    logger.debug(f"已加载运行配置 {config.name}: {path}")
    return config
