"""
梯度爆炸率的闭式界

C(R) = erfc(−R) / [(1+2R²)·erfc(−R) + 2R·e^{−R²}/√π − (R·erfc(−R) + e^{−R²}/√π)²]

数值分段：
    R > 0          展开后的无抵消形式（2R² 项解析相消）
    −5 ≤ R ≤ 0     直接形式
    −50 < R < −5   分子分母同除 e^{−R²}，使用 erfcx
    R ≤ −50        渐近级数 C ≈ s²(1 − u + 3u² − 15u³)/(1 − 6u + 45u²)，s = −R，u = 1/(2s²)
C 在 R → −∞ 时按 R² + 5/2 增长，全实轴有限，无需哨兵值。
"""

import math
import logging
from dataclasses import asdict, dataclass
from typing import Dict, Tuple

import numpy as np
import pandas as pd
from scipy import special

from ..errors import DomainError

logger = logging.getLogger(__name__)

SQRT_PI = math.sqrt(math.pi)
SCALED_SWITCH = -5.0
ASYMPTOTIC_SWITCH = -50.0


@dataclass(frozen=True)
class ExplosionBound:
    """单个块的梯度爆炸率下界、上界系数与上界失效概率"""
    c_r: float
    upper_factor: float
    failure_prob: float

    def __post_init__(self):
        if self.upper_factor < 1.0:
            raise DomainError(f"upper_factor 必须 >= 1，实际 {self.upper_factor}")
        if not 0.0 <= self.failure_prob <= 1.0:
            raise DomainError(f"failure_prob 必须在 [0,1] 内，实际 {self.failure_prob}")

    @property
    def upper(self) -> float:
        return self.c_r * self.upper_factor

    @property
    def gradient_rate(self) -> float:
        """梯度标准差的逐层放大倍数 √C(R)"""
        return math.sqrt(self.c_r)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['upper'] = self.upper
        data['gradient_rate'] = self.gradient_rate
        return data


def _check_r(r: float) -> float:
    r = float(r)
    if math.isnan(r):
        raise DomainError("r 不能为 NaN")
    return r


def _num_den(r: float) -> Tuple[float, float, float]:
    """返回 (分子, 分母, 分母−分子)，三者同比例缩放"""
    if r > 0:
        e = math.exp(-r * r)
        eps = float(special.erfc(r))
        num = 2.0 - eps
        # 2R²ε − 2Re/√π 用 erfcx 写成 2Re·(R·erfcx(R) − 1/√π)
        lead = 2.0 * r * e * (r * float(special.erfcx(r)) - 1.0 / SQRT_PI)
        diff = lead - r * r * eps * eps + 2.0 * r * eps * e / SQRT_PI - e * e / math.pi
        return num, num + diff, diff

    if r >= SCALED_SWITCH:
        e = math.exp(-r * r)
        num = float(special.erfc(-r))
        den = (1.0 + 2.0 * r * r) * num + 2.0 * r * e / SQRT_PI - (r * num + e / SQRT_PI) ** 2
        return num, den, den - num

    s = -r
    e = math.exp(-s * s)
    scaled = float(special.erfcx(s))
    num = scaled
    den = (1.0 + 2.0 * s * s) * scaled - 2.0 * s / SQRT_PI - e * (1.0 / SQRT_PI - s * scaled) ** 2
    return num, den, den - num


def _asymptotic(r: float) -> float:
    s2 = r * r
    u = 1.0 / (2.0 * s2)
    return s2 * (1.0 - u + 3.0 * u ** 2 - 15.0 * u ** 3) / (1.0 - 6.0 * u + 45.0 * u ** 2)


def explosion_rate_lower(r: float) -> float:
    """
    梯度方差逐块放大倍数的下界 C(R)

    Args:
        r: R = mu / (√2·sigma)

    Returns:
        C(R)；R → +∞ 趋于 1（伪线性），R → −∞ 发散（阻断）
    """
    r = _check_r(r)
    if math.isinf(r):
        return 1.0 if r > 0 else math.inf
    if r <= ASYMPTOTIC_SWITCH:
        return _asymptotic(r)
    num, den, _ = _num_den(r)
    return num / den


def explosion_rate_excess(r: float) -> float:
    """C(R) − 1，在 C 舍入为 1.0 的区域仍保持相对精度"""
    r = _check_r(r)
    if math.isinf(r):
        return 0.0 if r > 0 else math.inf
    if r <= ASYMPTOTIC_SWITCH:
        return _asymptotic(r) - 1.0
    _, den, diff = _num_den(r)
    return -diff / den


def upper_bound_factor(mu_w: float, sigma_w: float, d_n: int, delta: float) -> float:
    """
    随机权重下上界相对下界的系数 1 + 2(1+μ²/σ²)(1+2μ²/σ²)/(d³δ³)
    """
    if not math.isfinite(mu_w):
        raise DomainError(f"mu_w 必须有限，实际 {mu_w}")
    if not math.isfinite(sigma_w) or sigma_w <= 0:
        raise DomainError(f"sigma_w 必须为正，实际 {sigma_w}")
    if int(d_n) != d_n or d_n < 1:
        raise DomainError(f"d_n 必须是 >= 1 的整数，实际 {d_n}")
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta 必须在 (0,1) 内，实际 {delta}")

    k = (mu_w / sigma_w) ** 2
    return 1.0 + 2.0 * (1.0 + k) * (1.0 + 2.0 * k) / (float(d_n) ** 3 * delta ** 3)


def divergence_probability(d_n: int, d_n1: int, delta: float) -> float:
    """
    上界失效概率 min(1, d_{n+1}·exp(−(d_n/2)(δ − 1 − ln δ)))
    """
    for name, d in (('d_n', d_n), ('d_n1', d_n1)):
        if int(d) != d or d < 1:
            raise DomainError(f"{name} 必须是 >= 1 的整数，实际 {d}")
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta 必须在 (0,1) 内，实际 {delta}")

    log_p = math.log(d_n1) - 0.5 * d_n * (delta - 1.0 - math.log(delta))
    if log_p >= 0.0:
        return 1.0
    return math.exp(log_p)


def correlated_rate_zero_centered() -> float:
    """输入完全相关且零中心时的块比率 π/(1+π)"""
    return math.pi / (1.0 + math.pi)


def explosion_bound(
    r: float,
    mu_w: float,
    sigma_w: float,
    d_n: int,
    d_n1: int,
    delta: float,
) -> ExplosionBound:
    """组合下界、上界系数与失效概率"""
    return ExplosionBound(
        c_r=explosion_rate_lower(r),
        upper_factor=upper_bound_factor(mu_w, sigma_w, d_n, delta),
        failure_prob=divergence_probability(d_n, d_n1, delta),
    )


def explosion_table(r_min: float, r_max: float, steps: int) -> pd.DataFrame:
    """
    等间距网格上的 C(R) 表

    Returns:
        列为 r, c_r, sqrt_c_r 的 DataFrame
    """
    if steps < 1:
        raise DomainError(f"steps 必须 >= 1，实际 {steps}")
    if not (math.isfinite(r_min) and math.isfinite(r_max)) or r_min > r_max:
        raise DomainError(f"网格区间无效: [{r_min}, {r_max}]")

    grid = np.linspace(r_min, r_max, steps)
    c = [explosion_rate_lower(r) for r in grid]
    logger.debug(f"C(R) 表: {steps} 个点, 区间 [{r_min}, {r_max}]")
    return pd.DataFrame({'r': grid, 'c_r': c, 'sqrt_c_r': np.sqrt(c)})
