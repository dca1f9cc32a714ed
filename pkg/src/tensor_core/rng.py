"""
可复现随机数流

采样算法：numpy PCG64 位生成器 + Generator.normal（Ziggurat 方法）。
相同 seed、相同调用序列 => 逐位相同的输出；并行运行使用 spawn() 派生的独立子流。
"""

import logging
from typing import Tuple

import numpy as np

from ..errors import DomainError
from .matrix import Matrix

logger = logging.getLogger(__name__)

ALGORITHM = "PCG64+ziggurat"


class RngStream:
    """单一所有者的随机数流，不可跨线程共享"""

    def __init__(self, seed: int):
        if seed < 0 or seed >= 2 ** 64:
            raise DomainError(f"seed 必须是 64 位无符号整数，实际 {seed}")
        self.seed = int(seed)
        self._generator = np.random.Generator(np.random.PCG64(self.seed))
        self.draws = 0  # 已发出的调用次数

    def spawn(self, index: int) -> "RngStream":
        """
        派生子流：由 (seed, index) 决定，与父流当前状态无关

        Args:
            index: 子流编号（如 sweep 中的种子序号）
        """
        child_seed = np.random.SeedSequence([self.seed, int(index)]).generate_state(2, dtype=np.uint64)
        return RngStream(int(child_seed[0]))

    def normal(self, mu: float, sigma: float, shape: Tuple[int, ...]) -> np.ndarray:
        if not np.isfinite(sigma) or sigma < 0:
            raise DomainError(f"sigma 必须为非负有限数，实际 {sigma}")
        self.draws += 1
        if sigma == 0:
            return np.full(shape, float(mu), dtype=np.float64)
        return self._generator.normal(mu, sigma, size=shape)

    def uniform(self, low: float, high: float, shape: Tuple[int, ...]) -> np.ndarray:
        self.draws += 1
        return self._generator.uniform(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        self.draws += 1
        return self._generator.permutation(n)

    def choice(self, n: int, k: int) -> np.ndarray:
        """无放回抽取 k 个下标（升序返回）"""
        if k > n:
            raise DomainError(f"无法从 {n} 个元素中无放回抽取 {k} 个")
        self.draws += 1
        return np.sort(self._generator.choice(n, size=k, replace=False))

    def bernoulli(self, keep_prob: float, shape: Tuple[int, ...]) -> np.ndarray:
        """以概率 keep_prob 取 1 的 0/1 掩码"""
        self.draws += 1
        return (self._generator.random(size=shape) < keep_prob).astype(np.float64)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, algorithm={ALGORITHM}, draws={self.draws})"


def gaussian(rng: RngStream, mu: float, sigma: float, rows: int, cols: int) -> Matrix:
    """
    i.i.d. N(mu, sigma²) 矩阵

    Args:
        rng: 随机数流
        mu: 均值
        sigma: 标准差（>= 0，为 0 时返回常数矩阵）
        rows, cols: 形状
    """
    if rows < 1 or cols < 1:
        raise DomainError(f"形状必须为正，实际 ({rows}, {cols})")
    return np.ascontiguousarray(rng.normal(mu, sigma, (rows, cols)))
