#!/usr/bin/env python3
"""
格层 - 满秩格的最近点解码、Voronoi 胞元几何与覆盖计数

约定：
- basis 的列是生成元，格点 = basis · λ，λ 为整数坐标（CellId）
- 缩放格 hΛ 的几何量不存储，使用处乘以 h
- 并列最近点取字典序最小的 CellId，得到互不相交的半开胞元
"""
import enum
import itertools
import logging
import math
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import HalfspaceIntersection
from scipy.spatial.distance import pdist

from .. import config
from ..errors import InvalidInputError, ResourceLimitError, UnsupportedDimensionError
from .models import VoronoiGeometry
from .utils import as_points, iter_slices, lexicographic_order

logger = logging.getLogger(__name__)

CellId = Tuple[int, ...]


class LatticeKind(str, enum.Enum):
    INTEGER = "integer_Zd"
    CHECKERBOARD = "checkerboard_Dn"
    HEXAGONAL = "hexagonal_A2"
    GENERAL = "general"


_SHORT_NAMES = {LatticeKind.INTEGER: "Zd", LatticeKind.CHECKERBOARD: "Dn",
                LatticeKind.HEXAGONAL: "A2", LatticeKind.GENERAL: "general"}
_LONG_NAMES = {short: kind for kind, short in _SHORT_NAMES.items()}


def canonical_basis(kind: LatticeKind, dim: int) -> np.ndarray:
    """
    各格族的标准生成矩阵（列为生成元）

    Args:
        kind: 格族
        dim: 维数

    Returns:
        np.ndarray: d×d 生成矩阵
    """
    kind = LatticeKind(kind)
    if kind == LatticeKind.INTEGER:
        return np.eye(dim)
    if kind == LatticeKind.CHECKERBOARD:
        if dim < 2:
            raise InvalidInputError("D_n 需要 n ≥ 2")
        # Conway–Sloane 生成矩阵的行：(-1,-1,0,..), (1,-1,0,..), (0,1,-1,..), ...
        rows = np.zeros((dim, dim))
        rows[0, :2] = [-1.0, -1.0]
        for i in range(1, dim):
            rows[i, i - 1], rows[i, i] = 1.0, -1.0
        return rows.T
    if kind == LatticeKind.HEXAGONAL:
        if dim != 2:
            raise InvalidInputError("A₂ 只在 d = 2 有定义")
        return np.array([[1.0, 0.5], [0.0, math.sqrt(3.0) / 2.0]])
    raise InvalidInputError("一般格必须显式给出 basis")


def lll_reduce(basis: np.ndarray, delta: float = 0.75) -> np.ndarray:
    """
    LLL 约化（列向量基），返回约化后的基

    Args:
        basis: d×d 满秩矩阵，列为生成元
        delta: Lovász 常数

    Returns:
        np.ndarray: 约化基（生成同一个格）
    """
    b = [np.array(col, dtype=float) for col in np.asarray(basis, dtype=float).T]
    n = len(b)

    def gram_schmidt():
        bstar, mu = [], np.zeros((n, n))
        for i in range(n):
            v = b[i].copy()
            for j in range(i):
                mu[i, j] = b[i] @ bstar[j] / (bstar[j] @ bstar[j])
                v -= mu[i, j] * bstar[j]
            bstar.append(v)
        return bstar, mu

    bstar, mu = gram_schmidt()
    k = 1
    while k < n:
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q:
                b[k] = b[k] - q * b[j]
                bstar, mu = gram_schmidt()
        if bstar[k] @ bstar[k] >= (delta - mu[k, k - 1] ** 2) * (bstar[k - 1] @ bstar[k - 1]):
            k += 1
        else:
            b[k], b[k - 1] = b[k - 1], b[k]
            bstar, mu = gram_schmidt()
            k = max(k - 1, 1)
    return np.stack(b, axis=1)


def lattice_vectors_within(basis: np.ndarray, radius: float, tol: float = 1e-9) -> np.ndarray:
    """
    枚举 |basis·k| ≤ radius 的全部整数坐标 k（含 0），按字典序排列

    Args:
        basis: 生成矩阵
        radius: 半径
        tol: 边界容差

    Returns:
        np.ndarray: (m, d) 整数坐标
    """
    dim = basis.shape[0]
    inverse = np.linalg.inv(basis)
    bounds = np.ceil(radius * np.linalg.norm(inverse, axis=1) + tol).astype(int)
    box_size = int(np.prod(2 * bounds + 1))
    if box_size > config.MAX_CELLS:
        raise ResourceLimitError(f"枚举盒包含 {box_size} 个候选点，超过上限 {config.MAX_CELLS}")
    ranges = [np.arange(-m, m + 1) for m in bounds]
    coords = np.stack([g.ravel() for g in np.meshgrid(*ranges, indexing="ij")], axis=-1)
    norms = np.linalg.norm(coords @ basis.T, axis=1)
    found = coords[norms <= radius + tol * max(1.0, radius)]
    return found[lexicographic_order(found)].reshape(-1, dim)


class Lattice:
    """
    满秩格 Λ = basis · Z^d

    Attributes:
        basis: d×d 生成矩阵（一般格在构造时做 LLL 约化）
        kind: 格族
    """

    def __init__(self, basis, kind: LatticeKind = LatticeKind.GENERAL):
        kind = LatticeKind(kind)
        basis = np.atleast_2d(np.asarray(basis, dtype=float))
        if basis.shape[0] != basis.shape[1] or not np.all(np.isfinite(basis)):
            raise InvalidInputError(f"basis 必须是有限方阵，当前形状 {basis.shape}")
        if abs(np.linalg.det(basis)) <= 1e-12:
            raise InvalidInputError("basis 必须满秩")
        if kind != LatticeKind.GENERAL:
            expected = canonical_basis(kind, basis.shape[0])
            if not np.allclose(basis, expected, atol=1e-12):
                raise InvalidInputError(f"{kind.value} 的 basis 必须是标准生成矩阵")
        else:
            basis = lll_reduce(basis)
        basis.setflags(write=False)
        self.basis: np.ndarray = basis
        self.kind: LatticeKind = kind
        self.dim: int = int(basis.shape[0])
        self.inverse: np.ndarray = np.linalg.inv(basis)

    # ------------------------------------------
    # 构造
    # ------------------------------------------

    @classmethod
    def integer(cls, dim: int) -> "Lattice":
        return cls(canonical_basis(LatticeKind.INTEGER, dim), LatticeKind.INTEGER)

    @classmethod
    def checkerboard(cls, dim: int) -> "Lattice":
        return cls(canonical_basis(LatticeKind.CHECKERBOARD, dim), LatticeKind.CHECKERBOARD)

    @classmethod
    def hexagonal(cls) -> "Lattice":
        return cls(canonical_basis(LatticeKind.HEXAGONAL, 2), LatticeKind.HEXAGONAL)

    @property
    def determinant(self) -> float:
        return float(abs(np.linalg.det(self.basis)))

    def to_dict(self) -> dict:
        out = {"kind": _SHORT_NAMES[self.kind], "dim": self.dim}
        if self.kind == LatticeKind.GENERAL:
            out["basis"] = self.basis.tolist()
        return out

    @classmethod
    def from_dict(cls, spec: dict) -> "Lattice":
        """
        从 JSON 规格构造：{"kind": "Zd"|"Dn"|"A2"|"general", "dim": d, "basis": [[...]]}
        """
        name = spec.get("kind")
        if name not in _LONG_NAMES:
            raise InvalidInputError(f"未知格类型: {name}，可选 {sorted(_LONG_NAMES)}")
        kind = _LONG_NAMES[name]
        if kind == LatticeKind.GENERAL:
            if "basis" not in spec:
                raise InvalidInputError("general 格必须给出 basis")
            basis = np.asarray(spec["basis"], dtype=float)
            if "dim" in spec and basis.shape[0] != int(spec["dim"]):
                raise InvalidInputError("basis 维数与 dim 不一致")
            return cls(basis, kind)
        dim = int(spec.get("dim", 2))
        return cls(canonical_basis(kind, dim), kind)

    def __eq__(self, other):
        return (isinstance(other, Lattice) and self.kind == other.kind
                and self.basis.shape == other.basis.shape and np.array_equal(self.basis, other.basis))

    def __hash__(self):
        return hash((self.kind, self.basis.tobytes()))

    def __repr__(self):
        return f"Lattice(kind={self.kind.value}, dim={self.dim})"

    # ------------------------------------------
    # 几何
    # ------------------------------------------

    @cached_property
    def geometry(self) -> VoronoiGeometry:
        return voronoi_geometry(self)

    @cached_property
    def search_offsets(self) -> np.ndarray:
        """Babai 取整点周围需要穷举的整数偏移（字典序）"""
        radius = float(np.sum(np.linalg.norm(self.basis, axis=0)))
        return lattice_vectors_within(self.basis, radius)

    @cached_property
    def neighbor_offsets(self) -> np.ndarray:
        """闭胞元与 V_0 相接触的全部格向量（含 0，字典序），|v| ≤ diam(V_0)"""
        return lattice_vectors_within(self.basis, self.geometry.diameter)

    @cached_property
    def cell_bbox(self) -> Tuple[np.ndarray, np.ndarray]:
        """V_0 的轴对齐包围盒"""
        if self.kind == LatticeKind.INTEGER:
            return -0.5 * np.ones(self.dim), 0.5 * np.ones(self.dim)
        vertices = self.geometry.vertices
        return vertices.min(axis=0), vertices.max(axis=0)

    def sites(self, cell_ids, h: float) -> np.ndarray:
        """CellId → 站点 h·basis·λ"""
        ids = np.atleast_2d(np.asarray(cell_ids, dtype=float))
        return h * ids @ self.basis.T

    def site(self, cell_id: Sequence[int], h: float) -> np.ndarray:
        return self.sites([cell_id], h)[0]


# ==========================================
# 解码
# ==========================================

def _decode_integer(t: np.ndarray) -> np.ndarray:
    # 每个坐标独立：x.5 处取较小整数，恰好是字典序最小的最近点
    return np.ceil(t - 0.5).astype(np.int64)


def _resolve_ties(lattice: Lattice, t: np.ndarray, centers: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """
    在 centers + offsets 中选出距离最近且字典序最小的格点

    offsets 已按字典序排列，因此同一行中第一个达到最小值的候选就是字典序最小者
    """
    basis = lattice.basis
    residual = t - centers @ basis.T
    shifted = offsets @ basis.T
    d2 = np.sum((residual[:, None, :] - shifted[None, :, :]) ** 2, axis=2)
    best = d2.min(axis=1, keepdims=True)
    scale = 1.0 + np.sum(residual ** 2, axis=1, keepdims=True) + float(np.sum(basis ** 2))
    is_min = d2 <= best + config.TIE_RELATIVE_TOLERANCE * scale
    first = np.argmax(is_min, axis=1)
    return centers + offsets[first]


def _decode_checkerboard(t: np.ndarray) -> np.ndarray:
    """Conway–Sloane D_n 解码（返回标准坐标下的格点）"""
    f = np.rint(t)
    odd = (np.sum(f, axis=1) % 2) != 0
    if np.any(odd):
        rows = np.nonzero(odd)[0]
        err = t[rows] - f[rows]
        worst = np.argmax(np.abs(err), axis=1)
        step = np.where(err[np.arange(len(rows)), worst] >= 0, 1.0, -1.0)
        f[rows, worst] += step
    return f


def decode_batch(lattice: Lattice, h: float, points) -> np.ndarray:
    """
    批量最近格点解码

    Args:
        lattice: 格
        h: 缩放因子（> 0）
        points: (n, d) 点

    Returns:
        np.ndarray: (n, d) 整数 CellId
    """
    if not h > 0:
        raise InvalidInputError(f"h 必须为正，当前 {h}")
    x = as_points(points, lattice.dim)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("解码输入必须是有限点")
    t = x / h
    if lattice.kind == LatticeKind.INTEGER:
        return _decode_integer(t)

    out = np.empty(t.shape, dtype=np.int64)
    for piece in iter_slices(t.shape[0], config.DECODE_CHUNK):
        tc = t[piece]
        if lattice.kind == LatticeKind.CHECKERBOARD:
            centers = np.rint(_decode_checkerboard(tc) @ lattice.inverse.T)
            offsets = lattice.neighbor_offsets
        else:
            centers = np.rint(tc @ lattice.inverse.T)
            offsets = lattice.search_offsets
        out[piece] = _resolve_ties(lattice, tc, centers, offsets).astype(np.int64)
    return out


def decode(lattice: Lattice, h: float, x) -> CellId:
    """
    单点最近格点解码：返回使 |x − h·basis·λ| 最小的 λ，并列时取字典序最小者

    Args:
        lattice: 格
        h: 缩放因子
        x: 点

    Returns:
        CellId: 整数坐标元组
    """
    point = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
    return tuple(int(c) for c in decode_batch(lattice, h, point)[0])


# ==========================================
# Voronoi 几何
# ==========================================

def _closed_form_geometry(lattice: Lattice) -> Optional[VoronoiGeometry]:
    d = lattice.dim
    if lattice.kind == LatticeKind.INTEGER:
        eye = np.eye(d)
        relevant = np.concatenate([eye, -eye])
        vertices = (np.array(list(itertools.product([-0.5, 0.5], repeat=d)))
                    if d <= 20 else np.empty((0, d)))
        return VoronoiGeometry(math.sqrt(d), math.sqrt(d) / 2.0, relevant, vertices)
    if lattice.kind == LatticeKind.CHECKERBOARD:
        # 最小向量 ±e_i ± e_j；顶点 ±e_i 与 (±½)^n（n = 2 时后者落在边上）
        minimal = []
        for i, j in itertools.combinations(range(d), 2):
            for si, sj in itertools.product([1.0, -1.0], repeat=2):
                v = np.zeros(d)
                v[i], v[j] = si, sj
                minimal.append(v)
        eye = np.eye(d)
        vertices = [eye, -eye]
        if d >= 3 and d <= 20:
            vertices.append(np.array(list(itertools.product([-0.5, 0.5], repeat=d))))
        radius = max(1.0, math.sqrt(d) / 2.0)
        return VoronoiGeometry(2.0 * radius, radius, np.array(minimal), np.concatenate(vertices))
    if lattice.kind == LatticeKind.HEXAGONAL:
        angles = np.pi / 6.0 + np.arange(6) * np.pi / 3.0
        vertices = np.stack([np.cos(angles), np.sin(angles)], axis=1) / math.sqrt(3.0)
        minimal_angles = np.arange(6) * np.pi / 3.0
        relevant = np.stack([np.cos(minimal_angles), np.sin(minimal_angles)], axis=1)
        return VoronoiGeometry(2.0 / math.sqrt(3.0), 1.0 / math.sqrt(3.0), relevant, vertices)
    return None


def _enumerated_geometry(lattice: Lattice) -> VoronoiGeometry:
    """一般格：枚举候选向量，用半空间交求 V_0 顶点"""
    d = lattice.dim
    if d > config.GENERAL_LATTICE_MAX_DIM:
        raise UnsupportedDimensionError(f"一般格的 Voronoi 几何只支持 d ≤ {config.GENERAL_LATTICE_MAX_DIM}，当前 d = {d}")
    lengths = np.linalg.norm(lattice.basis, axis=0)
    radius = max(2.0 * float(lengths.max()), float(np.sqrt(np.sum(lengths ** 2))))
    coords = lattice_vectors_within(lattice.basis, radius)
    coords = coords[np.any(coords != 0, axis=1)]
    vectors = coords @ lattice.basis.T

    if d == 1:
        half = abs(float(lattice.basis[0, 0])) / 2.0
        vertices = np.array([[-half], [half]])
        relevant = np.array([[2 * half], [-2 * half]])
        return VoronoiGeometry(2 * half, half, relevant, vertices)

    sq = np.sum(vectors ** 2, axis=1)
    halfspaces = np.hstack([vectors, -0.5 * sq[:, None]])
    hs = HalfspaceIntersection(halfspaces, np.zeros(d))
    vertices = np.unique(np.round(hs.intersections, 12), axis=0)

    # Voronoi 判据：v 相关当且仅当对所有 w ∉ {0, ±v} 有 w·v < |w|²
    relevant = []
    for v in vectors:
        others = ~(np.all(np.isclose(vectors, v), axis=1) | np.all(np.isclose(vectors, -v), axis=1))
        if np.all(vectors[others] @ v < sq[others] - 1e-9):
            relevant.append(v)
    covering = float(np.max(np.linalg.norm(vertices, axis=1)))
    diameter = float(np.max(pdist(vertices)))
    return VoronoiGeometry(diameter, covering, np.array(relevant), vertices)


def voronoi_geometry(lattice: Lattice) -> VoronoiGeometry:
    """
    V_0 的直径、覆盖半径、相关向量与顶点（未缩放）

    Z^d / D_n / A₂ 用闭式；一般格（d ≤ 4）枚举 2×最长基向量内的格向量

    Args:
        lattice: 格

    Returns:
        VoronoiGeometry: 胞元几何
    """
    geometry = _closed_form_geometry(lattice)
    if geometry is None:
        geometry = _enumerated_geometry(lattice)
        logger.info(f"[Lattice] 一般格 d={lattice.dim}: diam={geometry.diameter:.6g}, "
                    f"rad={geometry.covering_radius:.6g}, 相关向量 {len(geometry.relevant_vectors)} 个")
    return geometry


def cell_volume(lattice: Lattice, h: float) -> float:
    """|V_{hλ}| = |det B|·h^d"""
    return lattice.determinant * h ** lattice.dim


def cell_vertices(lattice: Lattice, h: float = 1.0, cell_id: Optional[Sequence[int]] = None) -> np.ndarray:
    """胞元 V_{hλ} 的顶点"""
    center = np.zeros(lattice.dim) if cell_id is None else lattice.site(cell_id, h)
    return center + h * lattice.geometry.vertices


# ==========================================
# 覆盖计数与有限枚举
# ==========================================

def _count_within(lattice: Lattice, radius: float) -> int:
    """|basis·k| ≤ radius 的格点个数，按第一个坐标分片计数"""
    estimate = math.pi ** (lattice.dim / 2) / math.gamma(lattice.dim / 2 + 1) * radius ** lattice.dim / lattice.determinant
    if estimate > config.MAX_CELLS:
        raise ResourceLimitError(f"预计 {estimate:.3g} 个格点，超过上限 {config.MAX_CELLS}")
    bounds = np.ceil(radius * np.linalg.norm(lattice.inverse, axis=1) + 1e-9).astype(int)
    tol = 1e-9 * max(1.0, radius)
    total = 0
    rest = [np.arange(-m, m + 1) for m in bounds[1:]]
    tail = (np.stack([g.ravel() for g in np.meshgrid(*rest, indexing="ij")], axis=-1)
            if rest else np.zeros((1, 0), dtype=int))
    for first in range(-bounds[0], bounds[0] + 1):
        coords = np.hstack([np.full((tail.shape[0], 1), first), tail])
        total += int(np.count_nonzero(np.linalg.norm(coords @ lattice.basis.T, axis=1) <= radius + tol))
        if total > config.MAX_CELLS:
            raise ResourceLimitError(f"覆盖计数超过上限 {config.MAX_CELLS}")
    return total


def covering_count(lattice: Lattice, h: float, R: float) -> int:
    """
    N(B_R, hV_0) 的可认证上界：#{λ : |h·basis·λ| ≤ R + h·rad(V_0)}

    Args:
        lattice: 格
        h: 缩放因子
        R: 球半径

    Returns:
        int: 覆盖计数
    """
    if not (R > 0 and h > 0):
        raise InvalidInputError("covering_count 需要 R > 0, h > 0")
    radius = (R + h * lattice.geometry.covering_radius) / h
    return _count_within(lattice, radius)


def cells_intersecting_box(lattice: Lattice, h: float, box: Tuple[Sequence[float], Sequence[float]]
                           ) -> List[CellId]:
    """
    闭包与盒子相交的全部胞元（允许多列，不允许漏列）

    盒子先按 h·rad(V_0) 膨胀；Z^d 直接取膨胀盒的整数包络，其他格在系数空间
    取包围盒后按站点是否落在膨胀盒内过滤

    Args:
        lattice: 格
        h: 缩放因子
        box: (lower, upper)

    Returns:
        List[CellId]: 字典序排列的 CellId
    """
    lower = np.atleast_1d(np.asarray(box[0], dtype=float))
    upper = np.atleast_1d(np.asarray(box[1], dtype=float))
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))) or np.any(upper < lower):
        raise InvalidInputError("盒子必须有界")
    inflate = h * lattice.geometry.covering_radius
    lo, hi = (lower - inflate) / h, (upper + inflate) / h

    if lattice.kind == LatticeKind.INTEGER:
        ranges = [np.arange(math.floor(a), math.ceil(b) + 1) for a, b in zip(lo, hi)]
        size = int(np.prod([len(r) for r in ranges]))
        if size > config.MAX_CELLS:
            raise ResourceLimitError(f"盒子内胞元数 {size} 超过上限 {config.MAX_CELLS}")
        grid = np.stack([g.ravel() for g in np.meshgrid(*ranges, indexing="ij")], axis=-1)
        return [tuple(int(c) for c in row) for row in grid]

    corners = np.array(list(itertools.product(*zip(lo, hi))))
    coeffs = corners @ lattice.inverse.T
    cmin = np.floor(coeffs.min(axis=0)).astype(int)
    cmax = np.ceil(coeffs.max(axis=0)).astype(int)
    size = int(np.prod(cmax - cmin + 1))
    if size > config.MAX_CELLS:
        raise ResourceLimitError(f"盒子内候选胞元数 {size} 超过上限 {config.MAX_CELLS}")
    ranges = [np.arange(a, b + 1) for a, b in zip(cmin, cmax)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*ranges, indexing="ij")], axis=-1)
    sites = grid @ lattice.basis.T
    tol = 1e-9 * (1.0 + np.abs(sites))
    inside = np.all((sites >= lo - tol) & (sites <= hi + tol), axis=1)
    kept = grid[inside]
    kept = kept[lexicographic_order(kept)]
    return [tuple(int(c) for c in row) for row in kept]
