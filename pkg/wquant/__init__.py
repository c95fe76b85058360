#!/usr/bin/env python3
"""
wquant - Wasserstein 空间中的 Voronoi 划分测度量化

core/     测度、格、量化、截断、精确运输
harness/  实验扫描、基线、报告与验收套件
"""

__version__ = "0.1.0"

from .errors import (
    WQuantError,
    InvalidInputError,
    MomentDivergenceError,
    SamplerInefficiencyError,
    UnsupportedDimensionError,
    ResourceLimitError,
    UnboundedSupportError,
    BudgetInfeasibleError,
    SolverFailureError,
)

__all__ = [
    '__version__',
    'WQuantError',
    'InvalidInputError',
    'MomentDivergenceError',
    'SamplerInefficiencyError',
    'UnsupportedDimensionError',
    'ResourceLimitError',
    'UnboundedSupportError',
    'BudgetInfeasibleError',
    'SolverFailureError',
]
