#!/usr/bin/env python3
"""
工具函数集

提供随机流、可复现求和、Gauss–Legendre 张量网格等数值辅助功能
"""
import math
from typing import Iterator, Sequence, Tuple

import numpy as np
from scipy.special import gamma, roots_legendre

from ..errors import InvalidInputError


def rng_for_chunk(seed: int, chunk_index: int = 0) -> np.random.Generator:
    """
    生成与分块编号绑定的随机流

    同一 (seed, chunk_index) 总得到相同的随机序列，与并行度无关

    Args:
        seed: 64 位无符号种子
        chunk_index: 分块编号

    Returns:
        np.random.Generator: 随机数生成器
    """
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(chunk_index)])


def iter_slices(total: int, chunk: int) -> Iterator[slice]:
    start = 0
    while start < total:
        yield slice(start, min(start + chunk, total))
        start += chunk


def stable_sum(values) -> float:
    """
    可复现的浮点求和

    math.fsum 的结果与求和顺序无关，保证不同线程数下总和逐位一致

    Args:
        values: 可迭代的实数

    Returns:
        float: 精确舍入的和
    """
    return math.fsum(float(v) for v in np.ravel(values))


def as_points(points, dim: int = None) -> np.ndarray:
    """把点列表转换成 (n, d) 的 float 数组"""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim in (None, 1) else arr.reshape(1, -1)
    if dim is not None and arr.shape[1] != dim:
        raise InvalidInputError(f"点的维数 {arr.shape[1]} 与期望维数 {dim} 不一致")
    return arr


def gauss_legendre_box(lower: Sequence[float], upper: Sequence[float], nodes_per_axis: int
                       ) -> Tuple[np.ndarray, np.ndarray]:
    """
    轴对齐盒子上的张量 Gauss–Legendre 节点与权重

    Args:
        lower: 盒子下角
        upper: 盒子上角
        nodes_per_axis: 每轴节点数

    Returns:
        (nodes, weights): nodes 形状 (n^d, d)，weights 之和等于盒子体积
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    ref_x, ref_w = roots_legendre(nodes_per_axis)
    axes, axis_weights = [], []
    for lo, hi in zip(lower, upper):
        half = 0.5 * (hi - lo)
        axes.append(lo + half * (ref_x + 1.0))
        axis_weights.append(half * ref_w)
    grids = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*axis_weights, indexing="ij")
    weights = np.prod(np.stack([w.ravel() for w in wgrids], axis=-1), axis=1)
    return nodes, weights


def sphere_surface_area(dim: int) -> float:
    """单位 (d−1) 维球面的面积 2π^{d/2}/Γ(d/2)"""
    return float(2.0 * math.pi ** (dim / 2.0) / gamma(dim / 2.0))


def lexicographic_order(rows: np.ndarray) -> np.ndarray:
    """按字典序排序整数行（第一列为最高优先级）"""
    rows = np.asarray(rows)
    return np.lexsort(rows.T[::-1])
