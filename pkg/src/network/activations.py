"""
激活函数
GELU 采用 tanh 近似，Swish 为 x·sigmoid(x)；Dropout 作为随机阻断信号的激活（反向缩放 1/(1−p)）
"""

import math
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np
from scipy.special import expit

from ..analytic import activation_gain
from ..errors import ConfigError, DomainError

GELU_C = math.sqrt(2.0 / math.pi)
GELU_K = 0.044715


@dataclass(frozen=True)
class ActivationKind:
    """激活函数种类及其参数"""
    name: str
    alpha: float = 0.0   # leaky_relu 负半轴斜率 / elu 饱和值
    p: float = 0.0       # dropout 丢弃概率

    NAMES = ('relu', 'leaky_relu', 'elu', 'swish', 'gelu', 'dropout', 'identity')
    PIECEWISE_LINEAR = ('relu', 'leaky_relu', 'identity')

    def __post_init__(self):
        if self.name not in self.NAMES:
            raise DomainError(f"未知激活函数: {self.name}")
        if self.name == 'leaky_relu' and not 0.0 <= self.alpha < 1.0:
            raise DomainError(f"LeakyReLU alpha 必须在 [0,1) 内，实际 {self.alpha}")
        if self.name == 'elu' and not self.alpha > 0.0:
            raise DomainError(f"ELU alpha 必须 > 0，实际 {self.alpha}")
        if self.name == 'dropout' and not 0.0 < self.p < 1.0:
            raise DomainError(f"Dropout p 必须在 (0,1) 内，实际 {self.p}")

    # 常用构造
    @classmethod
    def relu(cls) -> "ActivationKind":
        return cls('relu')

    @classmethod
    def leaky_relu(cls, alpha: float = 0.2) -> "ActivationKind":
        return cls('leaky_relu', alpha=alpha)

    @classmethod
    def elu(cls, alpha: float = 1.0) -> "ActivationKind":
        return cls('elu', alpha=alpha)

    @classmethod
    def swish(cls) -> "ActivationKind":
        return cls('swish')

    @classmethod
    def gelu(cls) -> "ActivationKind":
        return cls('gelu')

    @classmethod
    def dropout(cls, p: float = 0.5) -> "ActivationKind":
        return cls('dropout', p=p)

    @classmethod
    def identity(cls) -> "ActivationKind":
        return cls('identity')

    @property
    def is_piecewise_linear(self) -> bool:
        return self.name in self.PIECEWISE_LINEAR

    @property
    def is_stochastic(self) -> bool:
        return self.name == 'dropout'

    def apply(self, x: np.ndarray) -> np.ndarray:
        """确定性前向（dropout 的随机掩码由层负责）"""
        if self.name == 'relu':
            return np.maximum(x, 0.0)
        if self.name == 'leaky_relu':
            return np.where(x > 0, x, self.alpha * x)
        if self.name == 'elu':
            return np.where(x > 0, x, self.alpha * np.expm1(np.minimum(x, 0.0)))
        if self.name == 'swish':
            return x * expit(x)
        if self.name == 'gelu':
            return 0.5 * x * (1.0 + np.tanh(GELU_C * (x + GELU_K * x ** 3)))
        return x.copy()

    def derivative(self, x: np.ndarray) -> np.ndarray:
        """导数；ReLU 在 0 处取 0"""
        if self.name == 'relu':
            return (x > 0).astype(np.float64)
        if self.name == 'leaky_relu':
            return np.where(x > 0, 1.0, self.alpha)
        if self.name == 'elu':
            return np.where(x > 0, 1.0, self.alpha * np.exp(np.minimum(x, 0.0)))
        if self.name == 'swish':
            s = expit(x)
            return s + x * s * (1.0 - s)
        if self.name == 'gelu':
            t = np.tanh(GELU_C * (x + GELU_K * x ** 3))
            return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
        return np.ones_like(x)

    def gain(self) -> float:
        """BN 块的平均场梯度方差增益；反向缩放的 dropout 恰为 1"""
        if self.is_stochastic:
            return 1.0
        return activation_gain(self.apply, self.derivative)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {'kind': self.name}
        if self.name in ('leaky_relu', 'elu'):
            data['alpha'] = self.alpha
        if self.name == 'dropout':
            data['p'] = self.p
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ActivationKind":
        allowed = {'kind', 'alpha', 'p', 'type'}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"激活函数配置包含未知字段: {sorted(unknown)}")
        name = data.get('kind')
        if name not in cls.NAMES:
            raise ConfigError(f"未知激活函数: {name}")
        if name == 'leaky_relu':
            kwargs = {'alpha': float(data.get('alpha', 0.2))}
        elif name == 'elu':
            kwargs = {'alpha': float(data.get('alpha', 1.0))}
        elif name == 'dropout':
            kwargs = {'p': float(data.get('p', 0.5))}
        else:
            extra = {'alpha', 'p'} & set(data)
            if extra:
                raise ConfigError(f"激活函数 {name} 不接受参数 {sorted(extra)}")
            kwargs = {}
        try:
            return cls(name, **kwargs)
        except DomainError as e:
            raise ConfigError(str(e)) from e

    def __str__(self) -> str:
        if self.name in ('leaky_relu', 'elu'):
            return f"{self.name}({self.alpha:g})"
        if self.name == 'dropout':
            return f"dropout({self.p:g})"
        return self.name
