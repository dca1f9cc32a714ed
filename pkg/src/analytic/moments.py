"""
整流高斯分布的矩

X = ReLU(Y), Y ~ N(mu, sigma²)：
    E[X]   = mu·Φ(mu/sigma) + sigma·φ(mu/sigma)
    Var[X] = (mu² + sigma²)·Φ(mu/sigma) + mu·sigma·φ(mu/sigma) − E[X]²
"""

import math
import logging
from dataclasses import asdict, dataclass
from typing import Callable, Dict

import numpy as np
from scipy import integrate, special

from ..errors import DomainError

logger = logging.getLogger(__name__)

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianSpec:
    """预激活分布 N(mu, sigma²)"""
    mu: float
    sigma: float

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise DomainError(f"mu 必须有限，实际 {self.mu}")
        if not math.isfinite(self.sigma) or self.sigma <= 0:
            raise DomainError(f"sigma 必须为正的有限数，实际 {self.sigma}")

    @property
    def ratio(self) -> float:
        """R = mu / (√2·sigma)"""
        return self.mu / (math.sqrt(2.0) * self.sigma)

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class ReluMoments:
    """ReLU 输出的均值与方差"""
    mean: float
    variance: float

    def to_dict(self) -> Dict:
        return asdict(self)


def gaussian_spec_from_bn(beta: float, gamma: float = 1.0) -> GaussianSpec:
    """BN 输出 γ·x̂ + β 的分布，x̂ 近似标准正态"""
    return GaussianSpec(mu=float(beta), sigma=abs(float(gamma)))


def relu_moments(spec: GaussianSpec) -> ReluMoments:
    """
    计算 ReLU(N(mu, sigma²)) 的均值与方差

    Args:
        spec: 预激活分布

    Returns:
        ReluMoments
    """
    mu, sigma = spec.mu, spec.sigma
    z = mu / sigma
    cdf = float(special.ndtr(z))
    pdf = INV_SQRT_2PI * math.exp(-0.5 * z * z)

    mean = mu * cdf + sigma * pdf
    if z >= 0.0:
        # 用尾概率 Q = Φ(−z) 展开 E[X²] − E[X]²，μ ≫ σ 时不再做两个大数相减
        tail = float(special.ndtr(-z))
        if tail == 0.0:
            scaled = 1.0
        else:
            scaled = 1.0 - tail + z * z * tail * (1.0 - tail) - z * pdf * (1.0 - 2.0 * tail) - pdf * pdf
        variance = max(sigma * sigma * scaled, 0.0)
    else:
        second = (mu * mu + sigma * sigma) * cdf + mu * sigma * pdf
        # 深度阻断区两项相减可能出现 -1e-300 量级的舍入
        variance = max(second - mean * mean, 0.0)
    mean = max(mean, 0.0)

    if variance > sigma * sigma + mu * mu:
        raise ArithmeticError(f"ReLU 方差 {variance} 超过 sigma²+mu² 上界")
    return ReluMoments(mean=mean, variance=variance)


def activation_gain(
    phi: Callable[[np.ndarray], np.ndarray],
    dphi: Callable[[np.ndarray], np.ndarray],
) -> float:
    """
    BN 归一化块的平均场梯度方差增益 E[φ'(x)²] / Var(φ(x))，x ~ N(0,1)

    Args:
        phi: 激活函数
        dphi: 激活函数导数

    Returns:
        每个 [Activation → Dense → BN] 块的梯度方差放大倍数
    """

    def weighted(f):
        return lambda x: float(f(np.array([x]))[0]) * INV_SQRT_2PI * math.exp(-0.5 * x * x)

    # 在 0 处分段，避开 ReLU 类函数的折点
    def quad(f):
        left, _ = integrate.quad(weighted(f), -np.inf, 0.0, limit=200)
        right, _ = integrate.quad(weighted(f), 0.0, np.inf, limit=200)
        return left + right

    grad_sq = quad(lambda x: dphi(x) ** 2)
    first = quad(phi)
    second = quad(lambda x: phi(x) ** 2)
    variance = second - first * first
    if variance <= 0:
        raise DomainError("激活函数输出方差为 0，增益无定义")
    return grad_sq / variance
