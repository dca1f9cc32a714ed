"""
层结构描述
Dense / BatchNorm / Activation / ResidualBlock，以及与运行配置 JSON 之间的转换
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from ..errors import ConfigError, ShapeError
from .activations import ActivationKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DenseSpec:
    in_dim: int
    out_dim: int
    has_bias: bool = True


@dataclass(frozen=True)
class BatchNormSpec:
    dim: int
    affine: bool = True
    gamma_init: float = 1.0
    beta_init: float = 0.0


@dataclass(frozen=True)
class ActivationSpec:
    kind: ActivationKind


@dataclass(frozen=True)
class ResidualSpec:
    """y = x + inner(x)，inner 必须把 d 维映射回 d 维"""
    inner: Tuple["LayerSpec", ...]


LayerSpec = Union[DenseSpec, BatchNormSpec, ActivationSpec, ResidualSpec]


def chain_dims(specs: Sequence[LayerSpec], input_dim: int) -> int:
    """
    校验维度链并返回输出维度

    Raises:
        ShapeError: 相邻层维度不衔接，或残差块内部不是 d → d
    """
    dim = input_dim
    for i, spec in enumerate(specs):
        if isinstance(spec, DenseSpec):
            if spec.in_dim != dim:
                raise ShapeError(f"第 {i} 层 Dense 输入维度 {spec.in_dim} 与上一层输出 {dim} 不一致")
            if spec.in_dim < 1 or spec.out_dim < 1:
                raise ShapeError(f"第 {i} 层 Dense 维度必须为正")
            dim = spec.out_dim
        elif isinstance(spec, BatchNormSpec):
            if spec.dim != dim:
                raise ShapeError(f"第 {i} 层 BatchNorm 维度 {spec.dim} 与输入 {dim} 不一致")
        elif isinstance(spec, ResidualSpec):
            inner_out = chain_dims(spec.inner, dim)
            if inner_out != dim:
                raise ShapeError(f"第 {i} 层残差块内部输出 {inner_out} 维，输入为 {dim} 维")
        elif not isinstance(spec, ActivationSpec):
            raise ShapeError(f"第 {i} 层类型未知: {spec!r}")
    return dim


def infer_input_dim(specs: Sequence[LayerSpec]) -> Optional[int]:
    """从第一个带维度的层推断输入维度"""
    for spec in specs:
        if isinstance(spec, DenseSpec):
            return spec.in_dim
        if isinstance(spec, BatchNormSpec):
            return spec.dim
        if isinstance(spec, ResidualSpec):
            inner = infer_input_dim(spec.inner)
            if inner is not None:
                return inner
    return None


def build_stack(
    depth: int,
    width: int,
    input_dim: Optional[int] = None,
    activation: Optional[ActivationKind] = None,
    residual: bool = False,
    bn_beta: float = 0.0,
    head: Optional[int] = None,
) -> List[LayerSpec]:
    """
    构造探针网络：[BN] + depth × [Activation → Dense → BN]

    Args:
        depth: 块数
        width: 每块宽度
        input_dim: 输入维度（默认等于 width，非 width 时第一块的 Dense 负责投影）
        activation: 激活函数，默认 ReLU
        residual: 是否把每块包成 [ResidualBlock(块) → BN]
        bn_beta: 所有 BN 的 β 初值，用于平移预激活均值
        head: 若给定，末尾追加 [Activation → Dense(width, head)]

    Returns:
        LayerSpec 列表
    """
    activation = activation or ActivationKind.relu()
    input_dim = input_dim or width
    if depth < 0 or width < 1:
        raise ShapeError(f"depth 必须 >= 0、width 必须 >= 1，实际 depth={depth}, width={width}")
    if residual and depth > 0 and input_dim != width:
        raise ShapeError("残差堆叠要求 input_dim == width")

    specs: List[LayerSpec] = [BatchNormSpec(input_dim, beta_init=bn_beta)]
    dim = input_dim
    for _ in range(depth):
        block = (
            ActivationSpec(activation),
            DenseSpec(dim, width),
            BatchNormSpec(width, beta_init=bn_beta),
        )
        if residual:
            specs.append(ResidualSpec(block))
            specs.append(BatchNormSpec(width, beta_init=bn_beta))
        else:
            specs.extend(block)
        dim = width
    if head is not None:
        specs.append(ActivationSpec(activation))
        specs.append(DenseSpec(dim, head))
    return specs


_LAYER_KEYS = {
    'dense': {'type', 'in_dim', 'out_dim', 'bias'},
    'batchnorm': {'type', 'dim', 'affine', 'gamma', 'beta'},
    'activation': {'type', 'kind', 'alpha', 'p'},
    'residual': {'type', 'inner'},
}


def _require(data: Dict[str, Any], key: str, kind: type, where: str) -> Any:
    if key not in data:
        raise ConfigError(f"{where} 缺少字段 '{key}'")
    value = data[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(f"{where}.{key} 必须是整数，实际 {value!r}")
    return value


def spec_from_dict(data: Dict[str, Any], where: str = "layers") -> LayerSpec:
    """
    解析单个层对象 {"type": "dense"|"batchnorm"|"activation"|"residual", ...}

    Raises:
        ConfigError: 类型未知、字段缺失或出现未知字段
    """
    if not isinstance(data, dict):
        raise ConfigError(f"{where} 必须是对象，实际 {data!r}")
    kind = data.get('type')
    if kind not in _LAYER_KEYS:
        raise ConfigError(f"{where}.type 未知: {kind!r}")
    unknown = set(data) - _LAYER_KEYS[kind]
    if unknown:
        raise ConfigError(f"{where} 包含未知字段: {sorted(unknown)}")

    if kind == 'dense':
        return DenseSpec(
            in_dim=_require(data, 'in_dim', int, where),
            out_dim=_require(data, 'out_dim', int, where),
            has_bias=bool(data.get('bias', True)),
        )
    if kind == 'batchnorm':
        return BatchNormSpec(
            dim=_require(data, 'dim', int, where),
            affine=bool(data.get('affine', True)),
            gamma_init=float(data.get('gamma', 1.0)),
            beta_init=float(data.get('beta', 0.0)),
        )
    if kind == 'activation':
        return ActivationSpec(ActivationKind.from_dict(data))

    inner = data.get('inner')
    if not isinstance(inner, list) or not inner:
        raise ConfigError(f"{where}.inner 必须是非空层列表")
    return ResidualSpec(tuple(spec_from_dict(d, f"{where}.inner[{j}]") for j, d in enumerate(inner)))


def specs_from_list(items: List[Dict[str, Any]]) -> List[LayerSpec]:
    if not isinstance(items, list):
        raise ConfigError("network.layers 必须是列表")
    return [spec_from_dict(d, f"layers[{i}]") for i, d in enumerate(items)]


def spec_to_dict(spec: LayerSpec) -> Dict[str, Any]:
    if isinstance(spec, DenseSpec):
        return {'type': 'dense', 'in_dim': spec.in_dim, 'out_dim': spec.out_dim, 'bias': spec.has_bias}
    if isinstance(spec, BatchNormSpec):
        return {'type': 'batchnorm', 'dim': spec.dim, 'affine': spec.affine,
                'gamma': spec.gamma_init, 'beta': spec.beta_init}
    if isinstance(spec, ActivationSpec):
        return {'type': 'activation', **spec.kind.to_dict()}
    return {'type': 'residual', 'inner': [spec_to_dict(s) for s in spec.inner]}
