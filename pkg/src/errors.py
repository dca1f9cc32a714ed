"""
异常定义模块
所有模块共用的错误类型，CLI 根据 exit_code 映射进程退出码
"""

from typing import Optional


class GradflowError(Exception):
    """gradflow 基础异常"""

    exit_code = 1


class DomainError(GradflowError, ValueError):
    """参数超出定义域（如 sigma <= 0、delta 不在 (0,1) 内）"""


class ShapeError(GradflowError, ValueError):
    """矩阵形状不匹配"""


class DegenerateInputError(GradflowError, ValueError):
    """输入退化（方差为 0、样本数不足等），统计量无定义"""


class PreconditionError(GradflowError, ValueError):
    """调用前置条件不满足（如 Hessian 探针遇到弯曲激活函数）"""


class ConfigError(GradflowError, ValueError):
    """运行配置错误，任何计算开始之前抛出"""

    exit_code = 2


class FormatError(GradflowError, ValueError):
    """数据文件格式错误"""

    exit_code = 3

    def __init__(
        self,
        message: str,
        offset: Optional[int] = None,
        row: Optional[int] = None,
        column: Optional[str] = None,
    ):
        self.offset = offset
        self.row = row
        self.column = column

        where = []
        if offset is not None:
            where.append(f"字节偏移 {offset}")
        if row is not None:
            where.append(f"第 {row} 行")
        if column is not None:
            where.append(f"列 '{column}'")
        if where:
            message = f"{message}（{', '.join(where)}）"
        super().__init__(message)
