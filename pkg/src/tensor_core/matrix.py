"""
矩阵基础操作
Matrix 即 C 连续（行优先）的 float64 二维 numpy 数组：行对应样本，列对应特征/宽度
"""

from typing import Any

import numpy as np

from ..errors import DomainError, ShapeError

Matrix = np.ndarray


def as_matrix(data: Any, name: str = "matrix") -> Matrix:
    """
    转换并校验为 Matrix

    Args:
        data: 任意可转为二维数组的数据
        name: 出错信息中使用的名字

    Returns:
        行优先 float64 二维数组（必要时复制）
    """
    m = np.ascontiguousarray(data, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ShapeError(f"{name} 必须是二维矩阵，实际维度 {m.ndim}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"{name} 行列数必须 >= 1，实际 {m.shape}")
    return m


def identity(n: int) -> Matrix:
    if n < 1:
        raise DomainError(f"单位矩阵阶数必须 >= 1，实际 {n}")
    return np.eye(n, dtype=np.float64)


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """
    矩阵乘法 a·b

    同一进程、同一输入下求和顺序固定，结果逐位可复现；并行只发生在独立运行之间。
    """
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul 需要二维矩阵，实际 {a.shape} 与 {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul 形状不匹配: {a.shape} · {b.shape}")
    return np.ascontiguousarray(a @ b)


def transpose(m: Matrix) -> Matrix:
    return np.ascontiguousarray(m.T)


def has_nonfinite(m: Matrix) -> bool:
    """NaN/Inf 检查"""
    return not bool(np.all(np.isfinite(m)))
