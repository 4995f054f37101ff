#!/usr/bin/env python3
# 异常定义模块 - 所有可预期的输入/配置错误都从 MJLSError 派生

from typing import Optional


class MJLSError(Exception):
    """工具箱异常基类"""


class DimensionError(MJLSError):
    """矩阵维度不一致（在任何校验之前直接报错）"""


class DomainError(MJLSError):
    """参数超出定义域，例如结果索引越界、阶段超出时域"""


class ConfigurationError(MJLSError):
    """模型或配置无法求解，例如 Λ 不正定"""


class OracleError(MJLSError):
    """暴力参考解不可信或规模过大"""


class ScenarioError(MJLSError):
    """场景文件格式错误，带行列号"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None) -> None:
        self.message = message
        self.line = line
        self.column = column
        super().__init__(self.__str__())

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        if self.column is None:
            return f"第 {self.line} 行: {self.message}"
        return f"第 {self.line} 行第 {self.column} 列: {self.message}"
