#!/usr/bin/env python3
"""
异常层级

库代码只抛出这里定义的异常，由 CLI 统一转换成日志和退出码
"""
from typing import Dict, Optional


class WQuantError(Exception):
    """wquant 所有异常的基类"""


class InvalidInputError(WQuantError, ValueError):
    """输入不满足前置条件（空站点集、重复站点、方案不匹配等）"""


class MomentDivergenceError(WQuantError):
    """矩或截断积分不是有限值"""


class SamplerInefficiencyError(WQuantError):
    """拒绝采样接受率低于下限"""


class UnsupportedDimensionError(WQuantError):
    """一般格在 d > 4 时不支持 Voronoi 几何计算"""


class ResourceLimitError(WQuantError):
    """枚举规模或 LP 规模超过上限"""


class UnboundedSupportError(WQuantError):
    """测度支撑无界，需要先经过 tail.project_to_ball 截断"""


class BudgetInfeasibleError(WQuantError):
    """项数预算 N 太小，无法保证 h ≤ 1"""

    def __init__(self, message: str, minimum_n: int):
        super().__init__(message)
        self.minimum_n = minimum_n


class SolverFailureError(WQuantError):
    """网络单纯形未能给出可认证的最优解"""

    def __init__(self, message: str, residuals: Optional[Dict[str, float]] = None):
        super().__init__(message)
        self.residuals = residuals or {}
