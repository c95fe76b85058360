#!/usr/bin/env python3
"""
核心数据结构

定义 测度 → 格 → 量化 → 截断 → 运输 各层之间传递的标准化记录
"""
import enum
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .. import config
from ..errors import InvalidInputError


class QuadratureMethod(str, enum.Enum):
    MONTE_CARLO = "monte_carlo"
    TENSOR_GRID = "tensor_grid"


@dataclass(frozen=True)
class QuadratureSpec:
    """
    求积设置

    Attributes:
        method: monte_carlo 或 tensor_grid（张量 Gauss–Legendre）
        samples_or_nodes_per_axis: 蒙特卡洛样本数 / 每轴节点数
        seed: 蒙特卡洛随机种子
    """
    method: QuadratureMethod = QuadratureMethod.TENSOR_GRID
    samples_or_nodes_per_axis: int = config.TENSOR_NODES_PER_AXIS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "method", QuadratureMethod(self.method))
        if self.samples_or_nodes_per_axis < 1:
            raise InvalidInputError("samples_or_nodes_per_axis 必须 ≥ 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidInputError("seed 必须是 64 位无符号整数")

    @classmethod
    def default_for(cls, dim: int, seed: int = 0) -> "QuadratureSpec":
        """d ≤ 2 用 64 点/轴张量网格，d ≥ 3 用 1e5 个蒙特卡洛样本"""
        if dim <= config.TENSOR_GRID_MAX_DIM:
            return cls(QuadratureMethod.TENSOR_GRID, config.TENSOR_NODES_PER_AXIS, seed)
        return cls(QuadratureMethod.MONTE_CARLO, config.MONTE_CARLO_SAMPLES, seed)

    def coarsened(self) -> "QuadratureSpec":
        """误差估计用的半分辨率设置"""
        return QuadratureSpec(self.method, max(1, self.samples_or_nodes_per_axis // 2), self.seed)

    def refined(self, factor: int) -> "QuadratureSpec":
        """节点数（或样本数）放大 factor 倍"""
        if factor == 1:
            return self
        return QuadratureSpec(self.method, self.samples_or_nodes_per_axis * int(factor), self.seed)

    def to_dict(self) -> Dict:
        return {
            "method": self.method.value,
            "samples_or_nodes_per_axis": self.samples_or_nodes_per_axis,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class QuadratureResult:
    """求积结果：数值 + 误差估计"""
    value: float
    error: float


@dataclass(frozen=True)
class ShellMassSpec:
    """
    奇异连续部分在整数壳层 B_{(j, j+1]} 上的质量

    Attributes:
        shell_masses: {j: μ⊥(B_{(j, j+1]})}
    """
    shell_masses: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        masses = {int(j): float(m) for j, m in self.shell_masses.items()}
        if any(m < 0 or not math.isfinite(m) for m in masses.values()):
            raise InvalidInputError("壳层质量必须是非负有限数")
        if math.fsum(masses.values()) > 1.0 + config.MASS_TOLERANCE:
            raise InvalidInputError("壳层质量之和不能超过 1")
        object.__setattr__(self, "shell_masses", dict(sorted(masses.items())))

    def to_dict(self) -> Dict:
        return {str(j): m for j, m in self.shell_masses.items()}


@dataclass(frozen=True)
class VoronoiGeometry:
    """
    未缩放的 Voronoi 胞元 V_0 几何量（使用处再乘以 h）

    Attributes:
        diameter: diam(V_0)
        covering_radius: rad(V_0)
        relevant_vectors: 定义胞元面的格向量
        vertices: V_0 的顶点（可能为空，表示未计算）
    """
    diameter: float
    covering_radius: float
    relevant_vectors: np.ndarray
    vertices: np.ndarray

    def scaled(self, h: float) -> Tuple[float, float]:
        """返回 (h·diam, h·rad)"""
        return h * self.diameter, h * self.covering_radius

    def to_dict(self) -> Dict:
        return {
            "diameter": self.diameter,
            "covering_radius": self.covering_radius,
            "relevant_vectors": np.asarray(self.relevant_vectors).tolist(),
            "vertices": np.asarray(self.vertices).tolist(),
        }


class ApproximantMode(str, enum.Enum):
    """dirac：质量放在站点；indicator：质量在胞元内均匀分布"""
    DIRAC = "dirac"
    INDICATOR = "indicator"


@dataclass(frozen=True)
class TransportPlan:
    """
    离散运输方案

    Attributes:
        source_index / target_index / mass: 非零条目的三元组
        cost_power: 代价指数 p
        total_cost: Σ mass·|x−y|^p
    """
    source_index: np.ndarray
    target_index: np.ndarray
    mass: np.ndarray
    cost_power: float
    total_cost: float

    def marginals(self, n_source: int, n_target: int) -> Tuple[np.ndarray, np.ndarray]:
        rows = np.bincount(self.source_index, weights=self.mass, minlength=n_source)
        cols = np.bincount(self.target_index, weights=self.mass, minlength=n_target)
        return rows, cols

    def to_dict(self) -> Dict:
        return {
            "cost_power": self.cost_power,
            "total_cost": self.total_cost,
            "entries": [
                [int(i), int(j), float(m)]
                for i, j, m in zip(self.source_index, self.target_index, self.mass)
            ],
        }


@dataclass(frozen=True)
class MomentBoundReport:
    """径向矩不等式的两侧数值"""
    lhs: float
    rhs: float
    inequality_id: str

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + config.BOUND_TOLERANCE

    def to_dict(self) -> Dict:
        return {"inequality_id": self.inequality_id, "lhs": self.lhs, "rhs": self.rhs,
                "passed": self.passed}


@dataclass(frozen=True)
class TailDecaySpec:
    """
    尾部衰减条件参数

    Attributes:
        epsilon: 目标截断误差 ε
        p: 代价指数
        R: 截断球半径
        q: 原子衰减指数（q > 1）
        dim: 空间维数 d
        sphere_constant: 条件 (1) 中的常数 C；None 表示单位球面面积 2π^{d/2}/Γ(d/2)
    """
    epsilon: float
    p: float
    R: float
    q: float
    dim: int = 2
    sphere_constant: Optional[float] = None

    def __post_init__(self):
        if not (self.epsilon > 0 and self.R > 0 and self.q > 1 and self.p >= 1 and self.dim >= 1):
            raise InvalidInputError("TailDecaySpec 需要 ε > 0, R > 0, q > 1, p ≥ 1, d ≥ 1")
        if self.sphere_constant is not None and self.sphere_constant <= 0:
            raise InvalidInputError("sphere_constant 必须为正")

    def to_dict(self) -> Dict:
        return {"epsilon": self.epsilon, "p": self.p, "R": self.R, "q": self.q,
                "dim": self.dim, "sphere_constant": self.sphere_constant}


@dataclass
class TruncationReport:
    """
    三个衰减条件的检查结果

    Attributes:
        bound_ac / bound_sc / bound_atomic: 由条件推出的 I₁, I₂, I₃ 上界
        total_bound: (I₁ + I₂ + I₃)^{1/p}
        conditions_pass: 条件 (1)(2)(3) 是否通过
        margins: 各条件的最小余量及违反项
        notes: 采用的解读（ζ(q) 归一化等）
    """
    bound_ac: float
    bound_sc: float
    bound_atomic: float
    total_bound: float
    conditions_pass: Tuple[bool, bool, bool]
    margins: Dict[str, Any] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    implication_guaranteed: bool = True

    def to_dict(self) -> Dict:
        return {
            "bound_ac": self.bound_ac,
            "bound_sc": self.bound_sc,
            "bound_atomic": self.bound_atomic,
            "total_bound": self.total_bound,
            "conditions_pass": list(self.conditions_pass),
            "implication_guaranteed": self.implication_guaranteed,
            "margins": self.margins,
            "notes": list(self.notes),
        }
