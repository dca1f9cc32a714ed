"""
网络引擎
初始化、带轨迹记录的前向、精确/冻结统计量两种反向、探针用的梯度注入与相关批构造
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, DomainError, ShapeError
from ..tensor_core import Matrix, RngStream, gaussian
from .layers import (
    ActivationLayer,
    BackwardContext,
    BatchNormLayer,
    BNMode,
    DenseLayer,
    ForwardContext,
    Layer,
    ResidualLayer,
)
from .specs import (
    ActivationSpec,
    BatchNormSpec,
    DenseSpec,
    LayerSpec,
    ResidualSpec,
    chain_dims,
    infer_input_dim,
)

logger = logging.getLogger(__name__)

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@dataclass(frozen=True)
class InitScheme:
    """权重初始化方案：he 为 N(0, 2/n_out)，fixed_sigma 为 N(0, sigma²)"""
    kind: str = 'he'
    sigma: float = 0.01

    def __post_init__(self):
        if self.kind not in ('he', 'fixed_sigma'):
            raise DomainError(f"未知初始化方案: {self.kind}")
        if self.kind == 'fixed_sigma' and not self.sigma > 0:
            raise DomainError(f"fixed_sigma 的 sigma 必须 > 0，实际 {self.sigma}")

    def std(self, spec: DenseSpec) -> float:
        if self.kind == 'he':
            return float(np.sqrt(2.0 / spec.out_dim))
        return self.sigma

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "InitScheme":
        unknown = set(data) - {'scheme', 'sigma'}
        if unknown:
            raise ConfigError(f"init 包含未知字段: {sorted(unknown)}")
        try:
            return cls(kind=data.get('scheme', 'he'), sigma=float(data.get('sigma', 0.01)))
        except DomainError as e:
            raise ConfigError(str(e)) from e


class NetworkState:
    """有序层栈及全部参数、BN 运行统计量"""

    def __init__(
        self,
        specs: Sequence[LayerSpec],
        layers: List[Layer],
        input_dim: int,
        output_dim: int,
        bn_mode: BNMode = BNMode.EXACT,
        train_flag: bool = True,
        bn_eps: float = BN_EPS,
        bn_momentum: float = BN_MOMENTUM,
    ):
        self.specs = list(specs)
        self.layers = layers
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.bn_mode = BNMode(bn_mode)
        self.train_flag = train_flag
        self.bn_eps = bn_eps
        self.bn_momentum = bn_momentum
        self._by_name = {layer.name: layer for layer in self.iter_layers()}

    def iter_layers(self) -> Iterator[Layer]:
        """深度优先遍历（含残差块内部）"""
        stack = list(reversed(self.layers))
        while stack:
            layer = stack.pop()
            yield layer
            stack.extend(reversed(layer.children()))

    def layer(self, name: str) -> Layer:
        return self._by_name[name]

    def named_parameters(self) -> List[Tuple[str, str, np.ndarray]]:
        """(参数全名, 角色 weight|bias|bn, 数组)，顺序固定"""
        out = []
        for layer in self.iter_layers():
            for pname, value in layer.parameters().items():
                out.append((f"{layer.name}.{pname}", layer.param_role(pname), value))
        return out

    def set_parameter(self, full_name: str, value: np.ndarray):
        layer_name, pname = full_name.rsplit('.', 1)
        layer = self._by_name[layer_name]
        current = layer.parameters()[pname]
        if value.shape != current.shape:
            raise ShapeError(f"参数 {full_name} 形状 {current.shape}，新值 {value.shape}")
        layer.set_parameter(pname, value)

    def dense_layers(self) -> List[DenseLayer]:
        return [layer for layer in self.iter_layers() if isinstance(layer, DenseLayer)]

    def activation_kinds(self):
        return [layer.kind for layer in self.iter_layers() if isinstance(layer, ActivationLayer)]

    def has_batchnorm(self) -> bool:
        return any(isinstance(layer, BatchNormLayer) for layer in self.iter_layers())

    def block_index(self) -> List[int]:
        """块输入处的边界下标（激活层或残差块之前）加上输出边界"""
        idx = [i for i, layer in enumerate(self.layers) if isinstance(layer, (ActivationLayer, ResidualLayer))]
        idx.append(len(self.layers))
        return sorted(set(idx))

    def block_dense(self) -> List[Optional[DenseLayer]]:
        """每个块输入边界对应块内的第一个 Dense 层；输出边界为 None"""
        blocks = self.block_index()
        result: List[Optional[DenseLayer]] = []
        for start, stop in zip(blocks[:-1], blocks[1:]):
            found = None
            for layer in self.layers[start:stop]:
                candidates = [layer] + [c for c in _descendants(layer)]
                found = next((c for c in candidates if isinstance(c, DenseLayer)), None)
                if found is not None:
                    break
            result.append(found)
        result.append(None)
        return result

    def copy(self) -> "NetworkState":
        return NetworkState(
            self.specs, [layer.copy() for layer in self.layers], self.input_dim, self.output_dim,
            self.bn_mode, self.train_flag, self.bn_eps, self.bn_momentum,
        )

    def __repr__(self) -> str:
        n_params = sum(v.size for _, _, v in self.named_parameters())
        return (f"NetworkState(layers={len(self.layers)}, {self.input_dim}->{self.output_dim}, "
                f"params={n_params}, bn_mode={self.bn_mode.value}, train={self.train_flag})")


def _descendants(layer: Layer) -> Iterator[Layer]:
    for child in layer.children():
        yield child
        yield from _descendants(child)


def _build_layers(specs: Sequence[LayerSpec], scheme: InitScheme, rng: RngStream, prefix: str) -> List[Layer]:
    layers: List[Layer] = []
    for i, spec in enumerate(specs):
        name = f"{prefix}{i}"
        if isinstance(spec, DenseSpec):
            W = gaussian(rng, 0.0, scheme.std(spec), spec.in_dim, spec.out_dim)
            layers.append(DenseLayer(name, spec, W))
        elif isinstance(spec, BatchNormSpec):
            layers.append(BatchNormLayer(name, spec))
        elif isinstance(spec, ActivationSpec):
            layers.append(ActivationLayer(name, spec))
        elif isinstance(spec, ResidualSpec):
            inner = _build_layers(spec.inner, scheme, rng, f"{name}.")
            layers.append(ResidualLayer(name, spec, inner))
    return layers


def init_network(
    specs: Sequence[LayerSpec],
    scheme: InitScheme,
    rng: RngStream,
    input_dim: Optional[int] = None,
    bn_mode: BNMode = BNMode.EXACT,
    train: bool = True,
    bn_eps: float = BN_EPS,
    bn_momentum: float = BN_MOMENTUM,
) -> NetworkState:
    """
    按规格初始化网络

    Args:
        specs: 层规格列表
        scheme: 初始化方案
        rng: 随机数流（按层顺序抽取权重）
        input_dim: 输入维度，缺省时从第一个带维度的层推断
        bn_mode: BN 反向模式
        train: 训练模式标志

    Returns:
        NetworkState
    """
    if input_dim is None:
        input_dim = infer_input_dim(specs)
        if input_dim is None:
            raise ShapeError("无法推断输入维度，请显式给出 input_dim")
    output_dim = chain_dims(specs, input_dim)
    layers = _build_layers(specs, scheme, rng, "")
    state = NetworkState(specs, layers, input_dim, output_dim, bn_mode, train, bn_eps, bn_momentum)
    logger.debug(f"网络初始化完成: {state!r}, 方案 {scheme.kind}")
    return state


@dataclass
class ForwardTrace:
    """前向轨迹：boundaries[i] 为第 i 层的输入，最后一个为网络输出"""
    boundaries: List[Matrix]
    caches: Dict[str, Any]
    block_index: List[int]
    bn_stats: Dict[str, Tuple[np.ndarray, np.ndarray]]
    train: bool

    @property
    def output(self) -> Matrix:
        return self.boundaries[-1]

    @property
    def blocks(self) -> List[Matrix]:
        return [self.boundaries[i] for i in self.block_index]


@dataclass
class BackwardTrace:
    """反向轨迹：grads[i] = dL/d boundaries[i]"""
    grads: List[Matrix]
    param_grads: Dict[str, np.ndarray]
    out_grads: Dict[str, np.ndarray]
    block_index: List[int]
    mode: BNMode = BNMode.EXACT

    @property
    def blocks(self) -> List[Matrix]:
        return [self.grads[i] for i in self.block_index]


def forward(
    state: NetworkState,
    batch: Matrix,
    rng: Optional[RngStream] = None,
    train: Optional[bool] = None,
    update_running_stats: Optional[bool] = None,
    bn_stats: Optional[Dict[str, Tuple[np.ndarray, np.ndarray]]] = None,
) -> ForwardTrace:
    """
    前向传播并记录每个层边界的激活

    Args:
        state: 网络
        batch: 输入 (B × input_dim)
        rng: dropout 掩码使用的随机数流
        train: 覆盖 state.train_flag
        update_running_stats: 是否更新 BN 运行统计量（默认训练模式且未冻结统计量时更新）
        bn_stats: 各 BN 层固定使用的 (mean, var)，来自先前的训练模式前向

    Returns:
        ForwardTrace
    """
    if batch.ndim != 2 or batch.shape[1] != state.input_dim:
        raise ShapeError(f"输入形状 {batch.shape} 与网络输入维度 {state.input_dim} 不符")
    train = state.train_flag if train is None else train
    if update_running_stats is None:
        update_running_stats = train and bn_stats is None

    ctx = ForwardContext(
        train=train,
        update_running=update_running_stats,
        eps=state.bn_eps,
        momentum=state.bn_momentum,
        rng=rng,
        bn_stats=bn_stats,
    )
    boundaries = [batch]
    x = batch
    for layer in state.layers:
        x = layer.forward(x, ctx)
        boundaries.append(x)
    return ForwardTrace(boundaries, ctx.caches, state.block_index(), ctx.used_stats, train)


def backward(
    state: NetworkState,
    trace: ForwardTrace,
    g_out: Matrix,
    mode: Optional[BNMode] = None,
) -> BackwardTrace:
    """
    反向传播

    Args:
        state: 与 trace 对应的网络
        trace: 前向轨迹
        g_out: 损失对网络输出的梯度
        mode: BN 反向模式，默认 state.bn_mode

    Returns:
        BackwardTrace
    """
    if g_out.shape != trace.output.shape:
        raise ShapeError(f"输出梯度形状 {g_out.shape} 与网络输出 {trace.output.shape} 不符")
    ctx = BackwardContext(mode=BNMode(mode or state.bn_mode))

    grads: List[Matrix] = [None] * len(trace.boundaries)
    grads[-1] = g_out
    g = g_out
    for i in range(len(state.layers) - 1, -1, -1):
        g = state.layers[i].backward(g, trace.caches, ctx)
        grads[i] = g
    return BackwardTrace(grads, ctx.param_grads, ctx.out_grads, trace.block_index, ctx.mode)


def inject_output_gradient(rng: RngStream, shape: Tuple[int, int]) -> Matrix:
    """与输入无关的 i.i.d. N(0,1) 输出梯度"""
    rows, cols = shape
    return gaussian(rng, 0.0, 1.0, rows, cols)


def make_correlated_batch(t: np.ndarray, rng: RngStream, batch_size: int) -> Matrix:
    """
    完全相关的输入批：第 k 行为 b_k·t，b_k ~ N(0,1)

    Raises:
        DomainError: t 为零向量
    """
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    if not np.any(t != 0.0):
        raise DomainError("相关批的方向向量 t 不能为零")
    if batch_size < 1:
        raise DomainError(f"batch_size 必须 >= 1，实际 {batch_size}")
    b = gaussian(rng, 0.0, 1.0, batch_size, 1)
    return np.ascontiguousarray(b * t[None, :])
