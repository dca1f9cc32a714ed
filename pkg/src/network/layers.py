"""
运行时层
每层的前向把反向所需的中间量写入 ForwardContext.caches[name]，反向从中读取；
层对象本身只持有参数，前向/反向不修改参数（BN 运行统计量除外）
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..errors import DegenerateInputError, PreconditionError
from ..tensor_core import RngStream, column_stats, matmul, transpose
from .specs import ActivationSpec, BatchNormSpec, DenseSpec, LayerSpec, ResidualSpec

logger = logging.getLogger(__name__)


class BNMode(str, Enum):
    """BN 反向模式"""
    EXACT = 'exact'      # 包含批统计量对输入的依赖
    FROZEN = 'frozen'    # 把 μ̂、σ̂ 当作常数


@dataclass
class ForwardContext:
    train: bool
    update_running: bool
    eps: float
    momentum: float
    rng: Optional[RngStream] = None
    bn_stats: Optional[Dict[str, Tuple[np.ndarray, np.ndarray]]] = None
    caches: Dict[str, Any] = field(default_factory=dict)
    used_stats: Dict[str, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)


@dataclass
class BackwardContext:
    mode: BNMode
    param_grads: Dict[str, np.ndarray] = field(default_factory=dict)
    out_grads: Dict[str, np.ndarray] = field(default_factory=dict)


class Layer(ABC):
    """层基类"""

    role = 'none'

    def __init__(self, name: str, spec: LayerSpec):
        self.name = name
        self.spec = spec

    def parameters(self) -> Dict[str, np.ndarray]:
        return {}

    def param_role(self, pname: str) -> str:
        return self.role

    def set_parameter(self, pname: str, value: np.ndarray):
        setattr(self, pname, value)

    def children(self) -> List["Layer"]:
        return []

    @abstractmethod
    def forward(self, x: np.ndarray, ctx: ForwardContext) -> np.ndarray:
        ...

    @abstractmethod
    def backward(self, g: np.ndarray, caches: Dict[str, Any], ctx: BackwardContext) -> np.ndarray:
        ...

    def per_sample_grads(self, caches: Dict[str, Any], g: np.ndarray) -> Dict[str, np.ndarray]:
        """每个样本的参数梯度，形状 (B, *param.shape)；g 为该样本损失在层输出处的梯度"""
        return {}

    def per_sample_norms(self, caches: Dict[str, Any], g: np.ndarray) -> Dict[str, np.ndarray]:
        """每个样本参数梯度的 Frobenius 范数，形状 (B,)"""
        return {k: np.sqrt((v.reshape(v.shape[0], -1) ** 2).sum(axis=1))
                for k, v in self.per_sample_grads(caches, g).items()}

    def copy(self) -> "Layer":
        clone = self.__class__.__new__(self.__class__)
        clone.__dict__ = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}
        return clone


class DenseLayer(Layer):
    """y = x·W + b，W 形状 in_dim × out_dim"""

    role = 'weight'

    def __init__(self, name: str, spec: DenseSpec, W: np.ndarray):
        super().__init__(name, spec)
        self.W = W
        self.b = np.zeros(spec.out_dim) if spec.has_bias else None

    def parameters(self) -> Dict[str, np.ndarray]:
        params = {'W': self.W}
        if self.b is not None:
            params['b'] = self.b
        return params

    def param_role(self, pname: str) -> str:
        return 'weight' if pname == 'W' else 'bias'

    def forward(self, x, ctx):
        ctx.caches[self.name] = x
        y = matmul(x, self.W)
        if self.b is not None:
            y = y + self.b
        return y

    def backward(self, g, caches, ctx):
        x = caches[self.name]
        ctx.out_grads[self.name] = g
        ctx.param_grads[f"{self.name}.W"] = matmul(transpose(x), g)
        if self.b is not None:
            ctx.param_grads[f"{self.name}.b"] = g.sum(axis=0)
        return matmul(g, transpose(self.W))

    def per_sample_grads(self, caches, g):
        x = caches[self.name]
        grads = {'W': np.einsum('bi,bj->bij', x, g)}
        if self.b is not None:
            grads['b'] = g.copy()
        return grads

    def per_sample_norms(self, caches, g):
        # 外积的 Frobenius 范数 = ‖x_b‖·‖g_b‖
        x = caches[self.name]
        g_norm = np.linalg.norm(g, axis=1)
        norms = {'W': np.linalg.norm(x, axis=1) * g_norm}
        if self.b is not None:
            norms['b'] = g_norm
        return norms


class BatchNormLayer(Layer):
    """批归一化：训练模式用批统计量（总体方差），评估模式用运行统计量"""

    role = 'bn'

    def __init__(self, name: str, spec: BatchNormSpec):
        super().__init__(name, spec)
        self.gamma = np.full(spec.dim, float(spec.gamma_init)) if spec.affine else None
        self.beta = np.full(spec.dim, float(spec.beta_init)) if spec.affine else None
        self.running_mean = np.zeros(spec.dim)
        self.running_var = np.ones(spec.dim)

    def parameters(self) -> Dict[str, np.ndarray]:
        if self.gamma is None:
            return {}
        return {'gamma': self.gamma, 'beta': self.beta}

    def forward(self, x, ctx):
        batch_dependent = False
        if ctx.bn_stats is not None and self.name in ctx.bn_stats:
            mean, var = ctx.bn_stats[self.name]
        elif ctx.train:
            if x.shape[0] < 2:
                raise DegenerateInputError(f"BN 层 {self.name} 训练模式需要至少 2 个样本，实际 {x.shape[0]}")
            mean, var = column_stats(x)
            batch_dependent = True
            if ctx.update_running:
                m = ctx.momentum
                self.running_mean = (1.0 - m) * self.running_mean + m * mean
                self.running_var = (1.0 - m) * self.running_var + m * var
        else:
            mean, var = self.running_mean, self.running_var

        inv_std = 1.0 / np.sqrt(var + ctx.eps)
        x_hat = (x - mean) * inv_std
        ctx.used_stats[self.name] = (mean, var)
        ctx.caches[self.name] = (x_hat, inv_std, batch_dependent)
        if self.gamma is None:
            return x_hat
        return x_hat * self.gamma + self.beta

    def backward(self, g, caches, ctx):
        x_hat, inv_std, batch_dependent = caches[self.name]
        ctx.out_grads[self.name] = g
        if self.gamma is not None:
            ctx.param_grads[f"{self.name}.gamma"] = (g * x_hat).sum(axis=0)
            ctx.param_grads[f"{self.name}.beta"] = g.sum(axis=0)
            g_hat = g * self.gamma
        else:
            g_hat = g

        if batch_dependent and ctx.mode == BNMode.EXACT:
            n = g.shape[0]
            return (inv_std / n) * (
                n * g_hat - g_hat.sum(axis=0) - x_hat * (g_hat * x_hat).sum(axis=0)
            )
        return g_hat * inv_std

    def per_sample_grads(self, caches, g):
        if self.gamma is None:
            return {}
        x_hat = caches[self.name][0]
        return {'gamma': g * x_hat, 'beta': g.copy()}


class ActivationLayer(Layer):
    """逐元素激活；dropout 在训练模式下按 1−p 保留并放大 1/(1−p)"""

    def __init__(self, name: str, spec: ActivationSpec):
        super().__init__(name, spec)
        self.kind = spec.kind

    def forward(self, x, ctx):
        if self.kind.is_stochastic:
            if not ctx.train:
                ctx.caches[self.name] = (x, None)
                return x.copy()
            if ctx.rng is None:
                raise PreconditionError(f"Dropout 层 {self.name} 训练模式需要随机数流 rng")
            keep = 1.0 - self.kind.p
            mask = ctx.rng.bernoulli(keep, x.shape) / keep
            ctx.caches[self.name] = (x, mask)
            return x * mask
        ctx.caches[self.name] = (x, None)
        return self.kind.apply(x)

    def backward(self, g, caches, ctx):
        x, mask = caches[self.name]
        if self.kind.is_stochastic:
            return g * mask if mask is not None else g.copy()
        return g * self.kind.derivative(x)


class ResidualLayer(Layer):
    """y = x + inner(x)"""

    def __init__(self, name: str, spec: ResidualSpec, inner: List[Layer]):
        super().__init__(name, spec)
        self.inner = inner

    def children(self) -> List[Layer]:
        return self.inner

    def forward(self, x, ctx):
        h = x
        for layer in self.inner:
            h = layer.forward(h, ctx)
        return x + h

    def backward(self, g, caches, ctx):
        h = g
        for layer in reversed(self.inner):
            h = layer.backward(h, caches, ctx)
        return g + h

    def copy(self) -> "ResidualLayer":
        return ResidualLayer(self.name, self.spec, [layer.copy() for layer in self.inner])
