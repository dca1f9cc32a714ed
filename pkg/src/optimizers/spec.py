"""
优化器与学习率调度的配置对象
各算法的默认 η / ε 按训练配方中的批大小表取值
"""

import math
import logging
from bisect import bisect_right
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict, Optional

from ..errors import ConfigError, DomainError

logger = logging.getLogger(__name__)


class OptimizerKind(str, Enum):
    SGD = 'sgd'
    LARS = 'lars'
    LAMB = 'lamb'        # 无截断的 LAMB 缩放（μ = ∞）
    LAMBC = 'lambc'
    CLARS = 'clars'
    AGC = 'agc'
    LALC = 'lalc'


class DecayKind(str, Enum):
    COSINE = 'cosine'
    CONSTANT = 'constant'


# 批大小 → η；介于两行之间时取不超过请求值的最大一行
_ETA_BATCHES = (128, 2048, 4096, 8192)
DEFAULT_ETA = {
    OptimizerKind.LARS: (1e-2, 1e-3, 1e-3, 1e-3),
    OptimizerKind.CLARS: (1e-2, 1e-3, 1e-3, 1e-4),
    OptimizerKind.LAMBC: (1e-2, 1e-2, 1e-2, 1e-2),
    OptimizerKind.AGC: (1e-1, 1e-1, 1e-2, 1e-2),
    OptimizerKind.LALC: (1e3, 1e3, 1e3, 2e3),
}

DEFAULT_EPS = {
    OptimizerKind.AGC: 1e-3,
    OptimizerKind.LALC: 1.0,
}
FALLBACK_EPS = 1e-8
DEFAULT_CLIP_MU = 1e-2


def default_eta(kind: OptimizerKind, batch_size: int) -> float:
    """
    按批大小查表得到 η

    Args:
        kind: 优化器种类
        batch_size: 有效批大小

    Returns:
        η；SGD 与 LAMB 不使用 η，返回 1.0
    """
    kind = OptimizerKind(kind)
    if kind not in DEFAULT_ETA:
        return 1.0
    if batch_size < 1:
        raise DomainError(f"batch_size 必须 >= 1，实际 {batch_size}")
    row = max(bisect_right(_ETA_BATCHES, batch_size) - 1, 0)
    return DEFAULT_ETA[kind][row]


def default_eps(kind: OptimizerKind) -> float:
    return DEFAULT_EPS.get(OptimizerKind(kind), FALLBACK_EPS)


def _number(data: Dict[str, Any], key: str, default: Any, where: str) -> Any:
    value = data.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key} 必须是数值，实际 {value!r}")
    return value


def _integer(data: Dict[str, Any], key: str, default: Any, where: str) -> Any:
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}.{key} 必须是整数，实际 {value!r}")
    return value


@dataclass(frozen=True)
class ScheduleSpec:
    """学习率调度：线性预热 + 余弦衰减（或常数），基础学习率按批大小线性放大"""
    base_lr: float
    batch_size: int
    reference_batch: int = 128
    warmup_steps: int = 0
    total_steps: int = 1
    decay: DecayKind = DecayKind.COSINE

    def __post_init__(self):
        object.__setattr__(self, 'decay', DecayKind(self.decay))
        if not (self.base_lr >= 0 and math.isfinite(self.base_lr)):
            raise DomainError(f"base_lr 必须为非负有限数，实际 {self.base_lr}")
        if self.batch_size < 1 or self.reference_batch < 1:
            raise DomainError("batch_size / reference_batch 必须 >= 1")
        if self.warmup_steps < 0:
            raise DomainError(f"warmup_steps 必须 >= 0，实际 {self.warmup_steps}")
        if self.total_steps <= self.warmup_steps:
            raise DomainError(f"total_steps ({self.total_steps}) 必须大于 warmup_steps ({self.warmup_steps})")

    @property
    def effective_base_lr(self) -> float:
        return self.base_lr * self.batch_size / self.reference_batch

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['decay'] = self.decay.value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any], where: str = "schedule") -> "ScheduleSpec":
        if not isinstance(data, dict):
            raise ConfigError(f"{where} 必须是对象")
        unknown = set(data) - {'base_lr', 'batch_size', 'reference_batch', 'warmup_steps', 'total_steps', 'decay'}
        if unknown:
            raise ConfigError(f"{where} 包含未知字段: {sorted(unknown)}")
        for key in ('base_lr', 'batch_size', 'total_steps'):
            if key not in data:
                raise ConfigError(f"{where} 缺少字段 '{key}'")
        decay = data.get('decay', 'cosine')
        if decay not in {d.value for d in DecayKind}:
            raise ConfigError(f"{where}.decay 未知: {decay!r}")
        try:
            return cls(
                base_lr=float(_number(data, 'base_lr', None, where)),
                batch_size=_integer(data, 'batch_size', None, where),
                reference_batch=_integer(data, 'reference_batch', 128, where),
                warmup_steps=_integer(data, 'warmup_steps', 0, where),
                total_steps=_integer(data, 'total_steps', None, where),
                decay=DecayKind(decay),
            )
        except DomainError as e:
            raise ConfigError(f"{where}: {e}") from e


@dataclass(frozen=True)
class OptimizerSpec:
    """
    逐层优化器配置

    eta / eps 为 None 时由 resolve() 按批大小表补全；
    clip_mu 仅 LAMBC 使用，phi_lo / phi_hi 为 LAMB 系缩放函数 φ 的可选钳制区间
    """
    kind: OptimizerKind = OptimizerKind.SGD
    momentum: float = 0.9
    weight_decay: float = 5e-4
    eta: Optional[float] = None
    eps: Optional[float] = None
    clip_mu: Optional[float] = None
    phi_lo: Optional[float] = None
    phi_hi: Optional[float] = None
    adapt_bn_bias: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'kind', OptimizerKind(self.kind))
        if not 0.0 <= self.momentum < 1.0:
            raise DomainError(f"momentum 必须位于 [0, 1)，实际 {self.momentum}")
        if self.weight_decay < 0:
            raise DomainError(f"weight_decay 必须 >= 0，实际 {self.weight_decay}")
        if self.eta is not None and not self.eta > 0:
            raise DomainError(f"eta 必须 > 0，实际 {self.eta}")
        if self.eps is not None and self.eps < 0:
            raise DomainError(f"eps 必须 >= 0，实际 {self.eps}")
        if self.clip_mu is not None:
            if self.kind != OptimizerKind.LAMBC:
                raise DomainError(f"clip_mu 仅适用于 lambc，当前为 {self.kind.value}")
            if not self.clip_mu > 0:
                raise DomainError(f"clip_mu 必须 > 0，实际 {self.clip_mu}")
        if self.phi_lo is not None and self.phi_hi is not None and self.phi_lo > self.phi_hi:
            raise DomainError(f"phi_lo ({self.phi_lo}) 不能大于 phi_hi ({self.phi_hi})")

    def resolve(self, batch_size: int) -> "OptimizerSpec":
        """补全缺省的 η、ε、μ"""
        eta = self.eta if self.eta is not None else default_eta(self.kind, batch_size)
        eps = self.eps if self.eps is not None else default_eps(self.kind)
        clip_mu = self.clip_mu
        if self.kind == OptimizerKind.LAMBC and clip_mu is None:
            clip_mu = DEFAULT_CLIP_MU
        return OptimizerSpec(
            self.kind, self.momentum, self.weight_decay, eta, eps, clip_mu,
            self.phi_lo, self.phi_hi, self.adapt_bn_bias,
        )

    def phi(self, z: float) -> float:
        """缩放函数 φ：默认恒等，可选钳制到 [phi_lo, phi_hi]"""
        if self.phi_lo is not None:
            z = max(z, self.phi_lo)
        if self.phi_hi is not None:
            z = min(z, self.phi_hi)
        return z

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['kind'] = self.kind.value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any], where: str = "optimizer") -> "OptimizerSpec":
        if not isinstance(data, dict):
            raise ConfigError(f"{where} 必须是对象")
        allowed = {'kind', 'momentum', 'weight_decay', 'eta', 'eps', 'clip_mu', 'phi_lo', 'phi_hi', 'adapt_bn_bias'}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"{where} 包含未知字段: {sorted(unknown)}")
        kind = data.get('kind')
        if kind not in {k.value for k in OptimizerKind}:
            raise ConfigError(f"{where}.kind 未知: {kind!r}")
        adapt = data.get('adapt_bn_bias', False)
        if not isinstance(adapt, bool):
            raise ConfigError(f"{where}.adapt_bn_bias 必须是布尔值")
        try:
            return cls(
                kind=OptimizerKind(kind),
                momentum=float(_number(data, 'momentum', 0.9, where)),
                weight_decay=float(_number(data, 'weight_decay', 5e-4, where)),
                eta=_number(data, 'eta', None, where),
                eps=_number(data, 'eps', None, where),
                clip_mu=_number(data, 'clip_mu', None, where),
                phi_lo=_number(data, 'phi_lo', None, where),
                phi_hi=_number(data, 'phi_hi', None, where),
                adapt_bn_bias=adapt,
            )
        except DomainError as e:
            raise ConfigError(f"{where}: {e}") from e
