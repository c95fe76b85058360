#!/usr/bin/env python3
"""
量化层 - Voronoi 划分近似 μ_h（格）与 μ_X（非均匀站点）

流程：
1. aligned_surrogate: 把测度离散成与方案胞元对齐的原子（每个原子带胞元标签）
2. quantize_*: 按标签累加得到胞元质量 μ(V)，组装 Approximant
3. coupling_cost: 沿显式耦合计算 (∫|x−y|^p dπ̃)^{1/p}
4. moment_bound_suite: 径向矩不等式两侧的数值
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist, pdist
from scipy.special import roots_legendre
from scipy.stats import qmc

from .. import config
from ..errors import BudgetInfeasibleError, InvalidInputError, ResourceLimitError, UnboundedSupportError
from .lattice import Lattice, LatticeKind, cells_intersecting_box, covering_count, decode_batch
from .measures import (DensityMeasure, DiscreteMeasure, Measure, measure_dim, support_box,
                       support_radius)
from .models import ApproximantMode, MomentBoundReport
from .utils import as_points, gauss_legendre_box, iter_slices, stable_sum

logger = logging.getLogger(__name__)


# ==========================================
# 方案
# ==========================================

@dataclass(frozen=True, eq=False)
class LatticeScheme:
    """缩放格方案 (Λ, h)，0 < h ≤ 1"""
    lattice: Lattice
    h: float

    def __post_init__(self):
        if not (0 < self.h <= 1):
            raise InvalidInputError(f"格方案要求 0 < h ≤ 1，当前 h = {self.h}")
        object.__setattr__(self, "h", float(self.h))

    @property
    def dim(self) -> int:
        return self.lattice.dim

    def matches(self, other) -> bool:
        return isinstance(other, LatticeScheme) and other.lattice == self.lattice and other.h == self.h

    def to_dict(self) -> Dict:
        return {"type": "lattice", "lattice": self.lattice.to_dict(), "h": self.h}


@dataclass(frozen=True, eq=False)
class SiteScheme:
    """
    非均匀站点方案 X = {x_1, ..., x_n}

    Attributes:
        sites: (n, d) 两两不同的站点
        domain: indicator 模式下胞元截断到的盒子（无界 Voronoi 胞元需要）
    """
    sites: np.ndarray
    domain: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        sites = np.array(as_points(self.sites), dtype=float)
        if sites.shape[0] == 0:
            raise InvalidInputError("站点集不能为空")
        if not np.all(np.isfinite(sites)):
            raise InvalidInputError("站点必须是有限坐标")
        if np.unique(sites, axis=0).shape[0] != sites.shape[0]:
            raise InvalidInputError("站点必须两两不同（q_X > 0）")
        sites.setflags(write=False)
        object.__setattr__(self, "sites", sites)
        if self.domain is not None:
            lo, hi = (np.asarray(b, dtype=float) for b in self.domain)
            object.__setattr__(self, "domain", (lo, hi))

    @property
    def dim(self) -> int:
        return int(self.sites.shape[1])

    def matches(self, other) -> bool:
        return (isinstance(other, SiteScheme) and other.sites.shape == self.sites.shape
                and np.array_equal(other.sites, self.sites))

    def to_dict(self) -> Dict:
        out = {"type": "sites", "sites": self.sites.tolist()}
        if self.domain is not None:
            out["domain"] = [self.domain[0].tolist(), self.domain[1].tolist()]
        return out


VoronoiScheme = Union[LatticeScheme, SiteScheme]


def scheme_from_dict(spec: Dict) -> VoronoiScheme:
    if spec.get("type") == "lattice":
        return LatticeScheme(Lattice.from_dict(spec["lattice"]), spec["h"])
    if spec.get("type") == "sites":
        domain = spec.get("domain")
        return SiteScheme(np.asarray(spec["sites"], dtype=float),
                          None if domain is None else (np.asarray(domain[0]), np.asarray(domain[1])))
    raise InvalidInputError(f"未知方案类型: {spec.get('type')}")


# ==========================================
# 胞元对齐的离散代理
# ==========================================

@dataclass(frozen=True)
class AlignedSurrogate:
    """
    与方案胞元对齐的离散代理：质量、耦合代价与精确 OT 共用同一组原子

    Attributes:
        points / weights: 原子及其质量（总和为 1）
        labels: 每个原子所属胞元在 cells 中的下标
        cells: 胞元标识（格：CellId 行，字典序；站点：站点下标）
        masses: 胞元质量 μ(V)
        errors: 每个胞元的求积误差估计
    """
    points: np.ndarray
    weights: np.ndarray
    labels: np.ndarray
    cells: np.ndarray
    masses: np.ndarray
    errors: np.ndarray

    def as_measure(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.points, self.weights)


@dataclass
class _Stratum:
    """单个组件的代理：细/粗两套节点，ids 为胞元标识行"""
    points: np.ndarray
    weights: np.ndarray
    ids: np.ndarray
    coarse_ids: np.ndarray
    coarse_weights: np.ndarray

    def scaled(self, factor: float) -> "_Stratum":
        return _Stratum(self.points, self.weights * factor, self.ids, self.coarse_ids, self.coarse_weights * factor)


def _unit_gauss(n: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _tensor_product(axis_nodes: np.ndarray, axis_weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    逐胞元的张量积

    Args:
        axis_nodes: (C, d, m) 每个胞元每轴的一维节点
        axis_weights: (C, d, m) 对应权重

    Returns:
        (points (C, m^d, d), weights (C, m^d))
    """
    n_cells, dim, m = axis_nodes.shape
    points = axis_nodes[:, 0, :, None]
    weights = axis_weights[:, 0, :]
    for k in range(1, dim):
        size = points.shape[1]
        points = np.concatenate([
            np.repeat(points, m, axis=1),
            np.tile(axis_nodes[:, k, :], (1, size))[..., None],
        ], axis=2)
        weights = (weights[:, :, None] * axis_weights[:, k, None, :]).reshape(n_cells, -1)
    return points, weights


def _integer_cell_range(lower: np.ndarray, upper: np.ndarray, h: float) -> np.ndarray:
    """与盒子有正体积交集的 Z^d 胞元（半开胞元 [h(c−½), h(c+½))）"""
    lo_ids = np.ceil(lower / h - 0.5).astype(np.int64)
    hi_ids = np.ceil(upper / h - 0.5).astype(np.int64)
    size = int(np.prod(hi_ids - lo_ids + 1))
    if size > config.MAX_CELLS:
        raise ResourceLimitError(f"支撑盒覆盖 {size} 个胞元，超过上限 {config.MAX_CELLS}")
    ranges = [np.arange(a, b + 1) for a, b in zip(lo_ids, hi_ids)]
    return np.stack([g.ravel() for g in np.meshgrid(*ranges, indexing="ij")], axis=-1)


def _orthant_nodes(measure: DensityMeasure, h: float, cells: np.ndarray, n: int
                   ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Z^d 胞元 ∩ 支撑盒在站点处切成象限子盒，每个子盒做 n 点/轴 Gauss–Legendre

    |x − site|^p 在每个子盒上对整数 p 是各坐标的多项式，节点足够时积分精确
    """
    ref_x, ref_w = _unit_gauss(n)
    lower, upper = measure.lower, measure.upper
    pts_out, w_out, id_out = [], [], []
    per_chunk = max(1, 2_000_000 // ((2 * n) ** measure.dim * measure.dim))
    for piece in iter_slices(cells.shape[0], per_chunk):
        ids = cells[piece]
        site = h * ids.astype(float)
        a = np.maximum(site - h / 2.0, lower)
        b = np.minimum(site + h / 2.0, upper)
        left_hi = np.minimum(site, b)
        right_lo = np.maximum(site, a)
        left_len = np.clip(left_hi - a, 0.0, None)
        right_len = np.clip(b - right_lo, 0.0, None)
        axis_nodes = np.concatenate([a[..., None] + left_len[..., None] * ref_x,
                                     right_lo[..., None] + right_len[..., None] * ref_x], axis=2)
        axis_weights = np.concatenate([left_len[..., None] * ref_w,
                                       right_len[..., None] * ref_w], axis=2)
        points, weights = _tensor_product(axis_nodes, axis_weights)
        owner = np.repeat(np.arange(ids.shape[0]), points.shape[1])
        points = points.reshape(-1, measure.dim)
        weights = weights.reshape(-1)
        keep = weights > 0
        points, weights, owner = points[keep], weights[keep], owner[keep]
        weights = weights * measure.evaluate(points)
        keep = weights > 0
        pts_out.append(points[keep])
        w_out.append(weights[keep])
        id_out.append(ids[owner[keep]])
    return np.concatenate(pts_out), np.concatenate(w_out), np.concatenate(id_out)


def _filtered_nodes(measure: DensityMeasure, lattice: Lattice, h: float, cells: np.ndarray, n: int
                    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """一般格：胞元包围盒 ∩ 支撑盒上的张量网格，只保留解码回本胞元的节点"""
    ref_x, ref_w = _unit_gauss(n)
    bb_lo, bb_hi = lattice.cell_bbox
    dim = measure.dim
    pts_out, w_out, id_out = [], [], []
    per_chunk = max(1, 2_000_000 // (n ** dim * dim))
    for piece in iter_slices(cells.shape[0], per_chunk):
        ids = cells[piece]
        site = lattice.sites(ids, h)
        a = np.maximum(site + h * bb_lo, measure.lower)
        b = np.minimum(site + h * bb_hi, measure.upper)
        length = np.clip(b - a, 0.0, None)
        axis_nodes = a[..., None] + length[..., None] * ref_x
        axis_weights = length[..., None] * ref_w
        points, weights = _tensor_product(axis_nodes, axis_weights)
        owner = np.repeat(np.arange(ids.shape[0]), points.shape[1])
        points = points.reshape(-1, dim)
        weights = weights.reshape(-1)
        keep = weights > 0
        points, weights, owner = points[keep], weights[keep], owner[keep]
        own_ids = ids[owner]
        inside = np.all(decode_batch(lattice, h, points) == own_ids, axis=1)
        points, weights, own_ids = points[inside], weights[inside], own_ids[inside]
        weights = weights * measure.evaluate(points)
        keep = weights > 0
        pts_out.append(points[keep])
        w_out.append(weights[keep])
        id_out.append(own_ids[keep])
    return np.concatenate(pts_out), np.concatenate(w_out), np.concatenate(id_out)


def _lattice_stratum(measure: Measure, scheme: LatticeScheme, refine: int = 1) -> _Stratum:
    lattice, h = scheme.lattice, scheme.h
    if isinstance(measure, DiscreteMeasure):
        ids = decode_batch(lattice, h, measure.locations)
        return _Stratum(measure.locations, measure.weights, ids, ids, measure.weights)
    if isinstance(measure, DensityMeasure):
        if lattice.kind == LatticeKind.INTEGER:
            cells = _integer_cell_range(measure.lower, measure.upper, h)
            n = config.CELL_GAUSS_NODES * refine
            fine = _orthant_nodes(measure, h, cells, n)
            coarse = _orthant_nodes(measure, h, cells, max(1, n // 2))
        else:
            cells = np.array(cells_intersecting_box(lattice, h, measure.support_box), dtype=np.int64)
            n = config.CELL_FILTER_NODES * refine
            fine = _filtered_nodes(measure, lattice, h, cells, n)
            coarse = _filtered_nodes(measure, lattice, h, cells, max(1, n // 2))
        return _Stratum(fine[0], fine[1], fine[2], coarse[2], coarse[1])
    parts = [_lattice_stratum(m, scheme, refine).scaled(w) for w, m in measure.components]
    return _merge_strata(parts)


def _site_stratum(measure: Measure, scheme: SiteScheme, refine: int = 1) -> _Stratum:
    tree = cKDTree(scheme.sites)
    if isinstance(measure, DiscreteMeasure):
        ids = nearest_sites(scheme.sites, measure.locations, tree)[:, None]
        return _Stratum(measure.locations, measure.weights, ids, ids, measure.weights)
    if isinstance(measure, DensityMeasure):
        spec = measure.quadrature.refined(refine)
        points, weights = measure.quadrature_atoms(spec)
        coarse_points, coarse_weights = measure.quadrature_atoms(spec.coarsened())
        keep, ckeep = weights > 0, coarse_weights > 0
        ids = nearest_sites(scheme.sites, points[keep], tree)[:, None]
        coarse_ids = nearest_sites(scheme.sites, coarse_points[ckeep], tree)[:, None]
        return _Stratum(points[keep], weights[keep], ids, coarse_ids, coarse_weights[ckeep])
    parts = [_site_stratum(m, scheme, refine).scaled(w) for w, m in measure.components]
    return _merge_strata(parts)


def _merge_strata(parts: List[_Stratum]) -> _Stratum:
    return _Stratum(
        np.concatenate([s.points for s in parts]),
        np.concatenate([s.weights for s in parts]),
        np.concatenate([s.ids for s in parts]),
        np.concatenate([s.coarse_ids for s in parts]),
        np.concatenate([s.coarse_weights for s in parts]),
    )


def _check_bounded(measure: Measure, dim: int):
    if measure_dim(measure) != dim:
        raise InvalidInputError(f"测度维数 {measure_dim(measure)} 与方案维数 {dim} 不一致")
    lo, hi = support_box(measure)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise UnboundedSupportError("测度支撑无界，请先用 tail.project_to_ball 截断")


def aligned_surrogate(measure: Measure, scheme: VoronoiScheme, refine: int = 1) -> AlignedSurrogate:
    """
    计算与方案胞元对齐的离散代理

    离散测度精确；密度测度：Z^d 用象限子盒 Gauss–Legendre，其它格用包围盒网格 + 解码过滤，
    非均匀站点用测度自带的全局求积。总质量偏差 ≤ 1e-6 时静默重归一化，超出则告警后重归一化。

    Args:
        measure: 有界支撑的测度
        scheme: 格方案或站点方案
        refine: 密度求积节点的加密倍数（用于离散化误差估计）

    Returns:
        AlignedSurrogate: 代理原子与胞元质量
    """
    _check_bounded(measure, scheme.dim)
    if refine < 1:
        raise InvalidInputError(f"refine 必须 ≥ 1，当前 {refine}")
    if isinstance(scheme, LatticeScheme):
        stratum = _lattice_stratum(measure, scheme, refine)
    else:
        stratum = _site_stratum(measure, scheme, refine)

    all_ids = np.concatenate([stratum.ids, stratum.coarse_ids])
    unique_ids, inverse = np.unique(all_ids, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    labels = inverse[: stratum.ids.shape[0]]
    coarse_labels = inverse[stratum.ids.shape[0]:]
    fine = np.bincount(labels, weights=stratum.weights, minlength=unique_ids.shape[0])
    coarse = np.bincount(coarse_labels, weights=stratum.coarse_weights, minlength=unique_ids.shape[0])

    total = stable_sum(stratum.weights)
    if not total > 0:
        raise InvalidInputError("测度在方案胞元上的总质量为 0")
    drift = abs(total - 1.0)
    if drift > config.RENORMALIZATION_LIMIT:
        logger.warning(f"[Quantize] 求积总质量 {total:.12g} 偏离 1 达 {drift:.3g}，已重归一化")
    elif drift > config.MASS_TOLERANCE:
        logger.debug(f"[Quantize] 求积总质量重归一化 {drift:.3g}")

    coarse_total = stable_sum(coarse)
    coarse = coarse / coarse_total if coarse_total > 0 else coarse
    masses = fine / total
    errors = np.abs(masses - coarse)

    occupied = masses > 0
    remap = np.cumsum(occupied) - 1
    point_keep = occupied[labels]
    cells = unique_ids[occupied]
    if cells.shape[1] == 1 and isinstance(scheme, SiteScheme):
        cells = cells[:, 0]
    return AlignedSurrogate(
        points=stratum.points[point_keep],
        weights=stratum.weights[point_keep] / total,
        labels=remap[labels[point_keep]],
        cells=cells,
        masses=masses[occupied],
        errors=errors[occupied],
    )


# ==========================================
# 近似测度
# ==========================================

@dataclass(eq=False)
class Approximant:
    """
    近似测度 Σ α_V τ_V

    Attributes:
        scheme: 生成它的方案
        mode: dirac（质量放在站点）/ indicator（质量在胞元内均匀）
        sites: (k, d) 站点
        masses: (k,) 胞元质量（均为正，和为 1）
        cells: 格方案为 (k, d) CellId；站点方案为 (k,) 站点下标
        cell_errors: 每个胞元质量的求积误差估计
    """
    scheme: VoronoiScheme
    mode: ApproximantMode
    sites: np.ndarray
    masses: np.ndarray
    cells: np.ndarray
    cell_errors: Optional[np.ndarray] = None
    surrogate: Optional[AlignedSurrogate] = field(default=None, repr=False)
    source: Any = field(default=None, repr=False)

    def __post_init__(self):
        self.mode = ApproximantMode(self.mode)
        if self.masses.shape[0] == 0 or np.any(self.masses <= 0):
            raise InvalidInputError("近似测度的胞元质量必须为正")
        if abs(stable_sum(self.masses) - 1.0) > config.APPROXIMANT_MASS_TOLERANCE:
            raise InvalidInputError(f"近似测度总质量 {stable_sum(self.masses)} 不等于 1")

    @property
    def n_cells(self) -> int:
        return int(self.masses.shape[0])

    def same_cells(self, other: "Approximant", tol: float = 1e-12) -> bool:
        """站点与质量逐个一致（在容差内）"""
        if self.mode != other.mode or self.sites.shape != other.sites.shape:
            return False
        return bool(np.array_equal(self.cells, other.cells)
                    and np.allclose(self.sites, other.sites, atol=tol, rtol=0)
                    and np.allclose(self.masses, other.masses, atol=tol, rtol=0))

    def to_dict(self) -> Dict:
        cells = []
        for site, mass, cell in zip(self.sites, self.masses, self.cells):
            cell_value = [int(c) for c in np.atleast_1d(cell)] if np.ndim(cell) else int(cell)
            cells.append({"site": [float(c) for c in site], "mass": float(mass), "cell": cell_value})
        return {"mode": self.mode.value, "scheme": self.scheme.to_dict(), "cells": cells}

    @classmethod
    def from_dict(cls, data: Dict) -> "Approximant":
        scheme = scheme_from_dict(data["scheme"])
        rows = data["cells"]
        sites = np.array([row["site"] for row in rows], dtype=float).reshape(len(rows), scheme.dim)
        masses = np.array([row["mass"] for row in rows], dtype=float)
        cells = np.array([row["cell"] for row in rows], dtype=np.int64)
        return cls(scheme, ApproximantMode(data["mode"]), sites, masses, cells)


def _build_approximant(measure: Measure, scheme: VoronoiScheme, mode: ApproximantMode,
                       refine: int = 1) -> Approximant:
    surrogate = aligned_surrogate(measure, scheme, refine)
    if isinstance(scheme, LatticeScheme):
        sites = scheme.lattice.sites(surrogate.cells, scheme.h)
    else:
        sites = scheme.sites[surrogate.cells]
    approximant = Approximant(scheme, mode, sites, surrogate.masses, surrogate.cells,
                              surrogate.errors, surrogate, measure)
    logger.info(f"[Quantize] {type(scheme).__name__} {mode.value}: {approximant.n_cells} 个胞元，"
                f"最大胞元误差 {float(surrogate.errors.max()):.3g}")
    return approximant


def quantize_lattice(measure: Measure, lattice: Lattice, h: float,
                     mode: ApproximantMode = ApproximantMode.DIRAC, refine: int = 1) -> Approximant:
    """
    缩放格量化 μ_h：胞元质量 μ(V_{hλ})，站点 h·basis·λ

    Args:
        measure: 有界支撑的测度
        lattice: 格
        h: 缩放因子（0 < h ≤ 1）
        mode: dirac / indicator
        refine: 密度求积节点的加密倍数

    Returns:
        Approximant: 近似测度（零质量胞元省略，胞元按 CellId 字典序）
    """
    return _build_approximant(measure, LatticeScheme(lattice, h), ApproximantMode(mode), refine)


def quantize_nonuniform(measure: Measure, sites, mode: ApproximantMode = ApproximantMode.DIRAC,
                        refine: int = 1) -> Approximant:
    """
    非均匀站点量化 μ_X：最近站点解码，并列时取下标最小的站点

    indicator 模式下胞元截断到测度的支撑盒

    Args:
        measure: 有界支撑的测度
        sites: (n, d) 两两不同的站点
        mode: dirac / indicator

    Returns:
        Approximant: 近似测度
    """
    mode = ApproximantMode(mode)
    domain = support_box(measure) if mode == ApproximantMode.INDICATOR else None
    return _build_approximant(measure, SiteScheme(sites, domain), mode, refine)


def nearest_sites(sites: np.ndarray, points, tree: Optional[cKDTree] = None) -> np.ndarray:
    """
    每个点的最近站点下标（并列时取最小下标）

    Args:
        sites: (n, d) 站点
        points: (m, d) 查询点
        tree: 可选的预建 cKDTree

    Returns:
        np.ndarray: (m,) 站点下标
    """
    x = as_points(points, sites.shape[1])
    n = sites.shape[0]
    if x.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    tree = tree if tree is not None else cKDTree(sites)
    k = min(n, config.NEAREST_SITE_CANDIDATES)
    dist, idx = tree.query(x, k=k)
    if k == 1:
        return np.asarray(idx, dtype=np.int64).reshape(-1)
    tied = dist <= dist[:, :1] * (1.0 + config.TIE_RELATIVE_TOLERANCE) + 1e-300
    choice = np.where(tied, idx, n).min(axis=1)
    overflow = np.nonzero(tied[:, -1] & (k < n))[0]
    for row in overflow:
        d = np.linalg.norm(sites - x[row], axis=1)
        choice[row] = int(np.argmax(d <= d.min() * (1.0 + config.TIE_RELATIVE_TOLERANCE)))
    return choice.astype(np.int64)


def dirac_realization(approximant: Approximant) -> DiscreteMeasure:
    """近似测度的 Dirac 形式 Σ μ(V) δ_site"""
    return DiscreteMeasure(approximant.sites, approximant.masses)


def term_count(approximant: Approximant, R: Optional[float] = None) -> int:
    """
    近似测度的项数

    Args:
        approximant: 近似测度
        R: 给定时只计站点落在 B_{R + h·rad(V_0)} 内的胞元

    Returns:
        int: 项数
    """
    if R is None:
        return approximant.n_cells
    radius = R
    if isinstance(approximant.scheme, LatticeScheme):
        radius += approximant.scheme.h * approximant.scheme.lattice.geometry.covering_radius
    norms = np.linalg.norm(approximant.sites, axis=1)
    return int(np.count_nonzero(norms <= radius + 1e-12))


# ==========================================
# 胞元节点集（indicator 模式）
# ==========================================

@dataclass(frozen=True)
class CellNodeSet:
    """
    胞元内均匀分布的离散化：points 属于 labels 对应的胞元，weights 在每个胞元内和为 1
    """
    points: np.ndarray
    weights: np.ndarray
    labels: np.ndarray


def reference_cell_nodes(lattice: Lattice, method: str = "gauss", count: Optional[int] = None
                         ) -> Tuple[np.ndarray, np.ndarray]:
    """
    V_0 上均匀分布的参考节点

    Args:
        lattice: 格
        method: "gauss"（包围盒张量 Gauss–Legendre，解码过滤）或 "halton"（k 个等权 Halton 点）
        count: gauss 为每轴节点数（默认 32，受每胞元 4096 上限约束）；halton 为点数（默认 16·d）

    Returns:
        (nodes, weights): 未缩放节点与和为 1 的权重
    """
    d = lattice.dim
    bb_lo, bb_hi = lattice.cell_bbox
    if method == "gauss":
        per_axis = count or config.INDICATOR_NODES_PER_AXIS
        per_axis = max(1, min(per_axis, int(math.floor(config.INDICATOR_MAX_NODES_PER_CELL ** (1.0 / d) + 1e-9))))
        nodes, weights = gauss_legendre_box(bb_lo, bb_hi, per_axis)
        if lattice.kind != LatticeKind.INTEGER:
            inside = np.all(decode_batch(lattice, 1.0, nodes) == 0, axis=1)
            nodes, weights = nodes[inside], weights[inside]
        return nodes, weights / stable_sum(weights)
    if method == "halton":
        k = count or config.INDICATOR_OT_NODES_PER_DIM * d
        engine = qmc.Halton(d, scramble=False)
        found = []
        total = 0
        while total < k:
            batch = qmc.scale(engine.random(4 * k), bb_lo, bb_hi)
            inside = np.all(decode_batch(lattice, 1.0, batch) == 0, axis=1)
            found.append(batch[inside])
            total += int(inside.sum())
        nodes = np.concatenate(found)[:k]
        return nodes, np.full(k, 1.0 / k)
    raise InvalidInputError(f"未知节点方法: {method}")


def cell_node_set(approximant: Approximant, method: str = "gauss", count: Optional[int] = None
                  ) -> CellNodeSet:
    """
    近似测度每个胞元上的节点集

    格方案：参考节点平移到每个站点；站点方案：支撑盒上的张量网格按最近站点分组，
    没有网格点的胞元退化为站点本身

    Args:
        approximant: 近似测度
        method: 格方案的节点方法（gauss / halton）
        count: 见 reference_cell_nodes

    Returns:
        CellNodeSet: 节点集
    """
    scheme = approximant.scheme
    if isinstance(scheme, LatticeScheme):
        ref, ref_w = reference_cell_nodes(scheme.lattice, method, count)
        points = (approximant.sites[:, None, :] + scheme.h * ref[None, :, :]).reshape(-1, scheme.dim)
        weights = np.tile(ref_w, approximant.n_cells)
        labels = np.repeat(np.arange(approximant.n_cells), ref.shape[0])
        return CellNodeSet(points, weights, labels)

    lo, hi = scheme.domain if scheme.domain is not None else (
        approximant.sites.min(axis=0), approximant.sites.max(axis=0))
    d = scheme.dim
    per_cell = min(config.INDICATOR_NODES_PER_AXIS ** d, config.INDICATOR_MAX_NODES_PER_CELL)
    total = min(per_cell * scheme.sites.shape[0], config.SITE_CELL_MAX_NODES)
    per_axis = max(2, int(total ** (1.0 / d)))
    grid, grid_w = gauss_legendre_box(lo, hi, per_axis)
    owner = nearest_sites(scheme.sites, grid)
    points, weights, labels = [], [], []
    for i, cell in enumerate(approximant.cells):
        mask = owner == int(cell)
        if np.any(mask):
            points.append(grid[mask])
            weights.append(grid_w[mask] / stable_sum(grid_w[mask]))
            labels.append(np.full(int(mask.sum()), i))
        else:
            points.append(approximant.sites[i:i + 1])
            weights.append(np.ones(1))
            labels.append(np.array([i]))
    return CellNodeSet(np.concatenate(points), np.concatenate(weights), np.concatenate(labels))


def realize(approximant: Approximant, nodes: Optional[CellNodeSet] = None) -> DiscreteMeasure:
    """
    近似测度的离散实现：dirac 为站点原子；indicator 为胞元节点集上按质量加权的原子
    """
    if approximant.mode == ApproximantMode.DIRAC:
        return dirac_realization(approximant)
    nodes = nodes or cell_node_set(approximant)
    return DiscreteMeasure(nodes.points, approximant.masses[nodes.labels] * nodes.weights)


# ==========================================
# 显式耦合代价
# ==========================================

def _surrogate_for(measure: Measure, approximant: Approximant) -> AlignedSurrogate:
    if approximant.surrogate is not None and approximant.source is measure:
        return approximant.surrogate
    surrogate = aligned_surrogate(measure, approximant.scheme)
    if (surrogate.cells.shape != approximant.cells.shape
            or not np.array_equal(surrogate.cells, approximant.cells)
            or not np.allclose(surrogate.masses, approximant.masses, atol=1e-9, rtol=0)):
        raise InvalidInputError("近似测度不是由该测度在同一方案下生成的")
    return surrogate


def coupling_cost(measure: Measure, approximant: Approximant, p: float,
                  nodes: Optional[CellNodeSet] = None) -> float:
    """
    显式耦合 π̃ 的代价 (∫|x−y|^p dπ̃)^{1/p}

    dirac：每个原子运到所属胞元的站点；indicator：每个原子按胞元节点权重摊到整个胞元

    Args:
        measure: 原测度
        approximant: 由该测度生成的近似测度
        p: 代价指数（≥ 1）
        nodes: indicator 模式的胞元节点集（None 表示 gauss 节点）

    Returns:
        float: 耦合代价，不小于 W_p(μ, approximant)
    """
    if not p >= 1:
        raise InvalidInputError(f"p 必须 ≥ 1，当前 {p}")
    surrogate = _surrogate_for(measure, approximant)
    x, w, labels = surrogate.points, surrogate.weights, surrogate.labels

    if approximant.mode == ApproximantMode.DIRAC:
        dist = np.linalg.norm(x - approximant.sites[labels], axis=1)
        return stable_sum(w * dist ** p) ** (1.0 / p)

    nodes = nodes or cell_node_set(approximant)
    scheme = approximant.scheme
    m = nodes.labels.shape[0] // approximant.n_cells
    shared = (isinstance(scheme, LatticeScheme)
              and np.array_equal(nodes.labels, np.repeat(np.arange(approximant.n_cells), m)))
    if shared:
        # 所有胞元共用同一组参考节点（cell_node_set 的布局）
        ref = (nodes.points[:m] - approximant.sites[0]) / scheme.h
        ref_w = nodes.weights[:m]
        chunk = max(1, 4_000_000 // (m * scheme.dim))
        terms = []
        for piece in iter_slices(x.shape[0], chunk):
            offset = x[piece] - approximant.sites[labels[piece]]
            diff = offset[:, None, :] - scheme.h * ref[None, :, :]
            terms.append(w[piece] * (np.linalg.norm(diff, axis=2) ** p @ ref_w))
        return stable_sum(np.concatenate(terms)) ** (1.0 / p)

    order = np.argsort(labels, kind="stable")
    node_order = np.argsort(nodes.labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(approximant.n_cells + 1))
    node_bounds = np.searchsorted(nodes.labels[node_order], np.arange(approximant.n_cells + 1))
    terms = []
    for c in range(approximant.n_cells):
        rows = order[bounds[c]:bounds[c + 1]]
        cols = node_order[node_bounds[c]:node_bounds[c + 1]]
        if rows.size == 0:
            continue
        cost = cdist(x[rows], nodes.points[cols]) ** p
        terms.append(w[rows] * (cost @ nodes.weights[cols]))
    return stable_sum(np.concatenate(terms)) ** (1.0 / p)


# ==========================================
# 网格范数与分离半径
# ==========================================

def _grid_scan(tree: cKDTree, n_sites: int, center: np.ndarray, R: float, spacing: float,
               want_linf: bool = False) -> Tuple[float, Optional[np.ndarray]]:
    """
    间距 spacing 的网格扫描：返回 max 最近站点距离 + (√d/2)·spacing，
    以及（可选）每个站点的 max|g| + (√d/2)·spacing
    """
    d = center.shape[0]
    gap = 0.5 * math.sqrt(d) * spacing
    m = int(math.ceil(R / spacing)) + 1
    shape = (2 * m + 1,) * d
    total = int(np.prod(shape, dtype=np.float64))
    best = -math.inf
    linf = np.full(n_sites, -math.inf) if want_linf else None
    for piece in iter_slices(total, 1_000_000):
        idx = np.stack(np.unravel_index(np.arange(piece.start, piece.stop), shape), axis=1)
        g = center + spacing * (idx - m)
        keep = np.linalg.norm(g - center, axis=1) <= R + gap
        g = g[keep]
        if g.shape[0] == 0:
            continue
        dist, which = tree.query(g)
        best = max(best, float(dist.max()))
        if want_linf:
            np.maximum.at(linf, which, np.linalg.norm(g, axis=1))
    if want_linf:
        linf = np.where(np.isfinite(linf), linf + gap, -math.inf)
    return best + gap, linf


def _mesh_norm_search(sites: np.ndarray, center: np.ndarray, R: float) -> Tuple[float, float]:
    """逐级加密网格，返回 (最佳证书, 对应间距)"""
    d = sites.shape[1]
    tree = cKDTree(sites)
    spacing = R / 8.0
    best, best_spacing = math.inf, spacing
    previous = None
    while True:
        points = (2 * (math.ceil(R / spacing) + 1) + 1) ** d
        if points > config.MESH_NORM_MAX_POINTS:
            if previous is None:
                raise ResourceLimitError(f"网格范数首层网格 {points} 点超过上限 {config.MESH_NORM_MAX_POINTS}")
            logger.info(f"[Quantize] 网格范数细化在间距 {spacing * 2:.3g} 处达到点数上限，证书 {best:.6g}")
            break
        certificate, _ = _grid_scan(tree, sites.shape[0], center, R, spacing)
        if certificate < best:
            best, best_spacing = certificate, spacing
        if previous is not None and abs(certificate - previous) < config.MESH_NORM_REFINE_TOLERANCE * R:
            break
        previous = certificate
        spacing /= 2.0
    return best, best_spacing


def mesh_norm(sites, domain_ball: Tuple[Sequence[float], float]) -> float:
    """
    网格范数 h_X 在球 B_R(center) 上的可认证上界

    网格值 + (√d/2)·间距 是上界；间距从 R/8 逐级减半，直到证书变化 < 1e-3·R

    Args:
        sites: (n, d) 非空站点
        domain_ball: (center, R)

    Returns:
        float: 上界估计
    """
    center, R = domain_ball
    if not R > 0:
        raise InvalidInputError(f"网格范数要求 R > 0，当前 {R}")
    sites = as_points(sites)
    if sites.shape[0] == 0:
        raise InvalidInputError("站点集不能为空")
    center = np.broadcast_to(np.asarray(center, dtype=float), (sites.shape[1],)).copy()
    value, _ = _mesh_norm_search(sites, center, float(R))
    return value


def separation_radius(sites) -> float:
    """
    分离半径 q_X = ½ min_{i≠j} |x_i − x_j|

    Args:
        sites: (n, d) 站点，n ≥ 2

    Returns:
        float: 分离半径
    """
    sites = as_points(sites)
    if sites.shape[0] < 2:
        raise InvalidInputError("分离半径至少需要 2 个站点")
    if sites.shape[0] <= config.SEPARATION_BRUTE_FORCE_LIMIT:
        closest = float(pdist(sites).min())
    else:
        dist, _ = cKDTree(sites).query(sites, k=2)
        closest = float(dist[:, 1].min())
    if closest <= 0:
        raise InvalidInputError("站点存在重复（q_X = 0）")
    return 0.5 * closest


@dataclass(frozen=True)
class NtermHypothesisReport:
    """h_X 的两侧假设 R·N^{−1/d} ≤ h_X ≤ C·N^{−1/d}"""
    n_inside: int
    mesh_norm: float
    lower: float
    upper: float
    bound: float

    @property
    def lower_holds(self) -> bool:
        return self.lower <= self.mesh_norm

    @property
    def upper_holds(self) -> bool:
        return self.mesh_norm <= self.upper

    def to_dict(self) -> Dict:
        return {"n_inside": self.n_inside, "mesh_norm": self.mesh_norm, "lower": self.lower,
                "upper": self.upper, "bound": self.bound, "lower_holds": self.lower_holds,
                "upper_holds": self.upper_holds}


def nterm_hypothesis(sites, R: float, C: float) -> NtermHypothesisReport:
    """
    检查 N 项非均匀量化的网格范数假设，N = #(X ∩ B_R)，并给出界 2C·N^{−1/d}

    Args:
        sites: 站点
        R: 球半径
        C: 上界常数

    Returns:
        NtermHypothesisReport: 检查结果
    """
    sites = as_points(sites)
    d = sites.shape[1]
    n = int(np.count_nonzero(np.linalg.norm(sites, axis=1) <= R))
    if n == 0:
        raise InvalidInputError("B_R 内没有站点")
    h_x = mesh_norm(sites, (np.zeros(d), R))
    scale = n ** (-1.0 / d)
    return NtermHypothesisReport(n, h_x, R * scale, C * scale, 2.0 * C * scale)


# ==========================================
# 径向矩不等式
# ==========================================

def _lattice_linf(scheme: LatticeScheme, sites: np.ndarray) -> np.ndarray:
    """‖x‖_{L∞(V_{hλ})} = max_vertex |site + h·v|"""
    lattice, h = scheme.lattice, scheme.h
    if lattice.kind == LatticeKind.INTEGER:
        return np.linalg.norm(np.abs(sites) + h / 2.0, axis=1)
    vertices = h * lattice.geometry.vertices
    out = np.empty(sites.shape[0])
    for piece in iter_slices(sites.shape[0], 4096):
        out[piece] = np.linalg.norm(sites[piece, None, :] + vertices[None, :, :], axis=2).max(axis=1)
    return out


def moment_bound_suite(measure: Measure, scheme: VoronoiScheme, p: float) -> List[MomentBoundReport]:
    """
    径向矩不等式的数值检查

    格方案（rad = rad(V_0)）：
      L3.2.i    Σ|hλ|^p μ(V) ≤ 2^{p−1}h^p rad^p + 2^{p−1}M_p
      L3.2.ii   Σ‖x‖^p_{L∞(V)} μ(V) ≤ 2^{p−1}·Σ|hλ|^p μ(V) + 2^{p−1}h^p rad^p
      L3.2.iii  Σ‖x‖^p_{L∞(V)} μ(V) ≤ (2^{2p−2}+2^{p−1})h^p rad^p + 2^{2p−2}M_p
    站点方案把 h·rad 换成 h_X（支撑球上的网格范数），L∞ 范数限制在支撑球内。
    (iii) 的 M_p 系数取 (i)(ii) 串联得到的 2^{2p−2}。

    Args:
        measure: 测度
        scheme: 方案
        p: 指数（≥ 1）

    Returns:
        List[MomentBoundReport]: 三条不等式的报告
    """
    if not p >= 1:
        raise InvalidInputError(f"p 必须 ≥ 1，当前 {p}")
    surrogate = aligned_surrogate(measure, scheme)
    m_p = stable_sum(surrogate.weights * np.linalg.norm(surrogate.points, axis=1) ** p)
    masses = surrogate.masses
    a, b = 2.0 ** (p - 1), 2.0 ** (2 * p - 2)

    if isinstance(scheme, LatticeScheme):
        sites = scheme.lattice.sites(surrogate.cells, scheme.h)
        spread = scheme.h * scheme.lattice.geometry.covering_radius
        linf = _lattice_linf(scheme, sites)
        prefix = "L3.2"
    else:
        sites = scheme.sites[surrogate.cells]
        R = max(support_radius(measure), 1e-9)
        center = np.zeros(scheme.dim)
        spread, spacing = _mesh_norm_search(scheme.sites, center, R)
        _, grid_linf = _grid_scan(cKDTree(scheme.sites), scheme.sites.shape[0], center, R, spacing, want_linf=True)
        fallback = np.linalg.norm(scheme.sites, axis=1) + spread
        per_site = np.where(np.isfinite(grid_linf), np.minimum(grid_linf, fallback), fallback)
        atom_norms = np.zeros(scheme.sites.shape[0])
        np.maximum.at(atom_norms, surrogate.cells[surrogate.labels], np.linalg.norm(surrogate.points, axis=1))
        linf = np.maximum(per_site, atom_norms)[surrogate.cells]
        prefix = "L5.1"

    lhs_i = stable_sum(np.linalg.norm(sites, axis=1) ** p * masses)
    lhs_ii = stable_sum(linf ** p * masses)
    reports = [
        MomentBoundReport(lhs_i, a * spread ** p + a * m_p, f"{prefix}.i"),
        MomentBoundReport(lhs_ii, a * lhs_i + a * spread ** p, f"{prefix}.ii"),
        MomentBoundReport(lhs_ii, (b + a) * spread ** p + b * m_p, f"{prefix}.iii"),
    ]
    for report in reports:
        if not report.passed:
            logger.warning(f"[Quantize] {report.inequality_id} 未通过: lhs={report.lhs:.6g} > rhs={report.rhs:.6g}")
    return reports


# ==========================================
# 项数预算
# ==========================================

def choose_h_for_budget(lattice: Lattice, R: float, N: int, covering_number: Optional[int] = None) -> float:
    """
    N 项预算对应的缩放 h = 3·(𝒩/N)^{1/d}

    Args:
        lattice: 格
        R: 支撑球半径
        N: 项数预算
        covering_number: 𝒩 的已知值；None 表示用 covering_count(lattice, 1, R)

    Returns:
        float: h ∈ (0, 1]
    """
    d = lattice.dim
    count = int(covering_number) if covering_number is not None else covering_count(lattice, 1.0, R)
    minimum = 3 ** d * count
    if N < minimum:
        raise BudgetInfeasibleError(f"项数预算 N = {N} 太小，至少需要 {minimum}", minimum)
    h = 3.0 * (count / N) ** (1.0 / d)
    return min(h, 1.0)
