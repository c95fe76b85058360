#!/usr/bin/env python3
"""
测度层 - 概率测度的表示、矩、采样与推前

三种表示：
- DiscreteMeasure: 原子列表（构造时归一化、合并重复位置）
- DensityMeasure: 有界支撑盒上的密度 + 求积设置
- Mixture: 有限混合 Σ w_i μ_i（深度 ≤ 8）

所有测度构造后不可变，所有运算在给定种子下是纯函数
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import norm

from .. import config
from ..errors import InvalidInputError, MomentDivergenceError, SamplerInefficiencyError
from .models import QuadratureMethod, QuadratureResult, QuadratureSpec
from .utils import as_points, gauss_legendre_box, iter_slices, rng_for_chunk, stable_sum

logger = logging.getLogger(__name__)

Box = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class Atom:
    """单个原子：位置 + 非负权重"""
    location: Tuple[float, ...]
    weight: float

    def __post_init__(self):
        loc = tuple(float(c) for c in np.atleast_1d(self.location))
        if not all(math.isfinite(c) for c in loc):
            raise InvalidInputError(f"原子位置必须是有限坐标: {loc}")
        if not (self.weight >= 0 and math.isfinite(self.weight)):
            raise InvalidInputError(f"原子权重必须非负: {self.weight}")
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "weight", float(self.weight))


class DiscreteMeasure:
    """
    离散概率测度 Σ c_i δ_{x_i}

    构造时：合并重复位置、丢弃权重 < 1e-15 的原子、归一化总质量为 1。
    原子按位置字典序存储。
    """

    def __init__(self, locations, weights=None, dim: Optional[int] = None):
        """
        Args:
            locations: (n, d) 原子位置
            weights: (n,) 非负权重；None 表示均匀权重
            dim: 维数（locations 为一维数组时用于区分 n 个 1D 点与单个 d 维点）
        """
        locs = as_points(locations, dim)
        if locs.shape[0] == 0:
            raise InvalidInputError("离散测度至少需要一个原子")
        if not np.all(np.isfinite(locs)):
            raise InvalidInputError("原子位置必须是有限坐标")
        if weights is None:
            w = np.full(locs.shape[0], 1.0 / locs.shape[0])
        else:
            w = np.asarray(weights, dtype=float).ravel()
            if w.shape[0] != locs.shape[0]:
                raise InvalidInputError("权重个数与原子个数不一致")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise InvalidInputError("原子权重必须非负且有限")
        total = stable_sum(w)
        if total <= 0:
            raise InvalidInputError("原子总权重必须为正")

        # 合并重复位置
        unique_locs, inverse = np.unique(locs, axis=0, return_inverse=True)
        merged = np.bincount(inverse.ravel(), weights=w / total, minlength=unique_locs.shape[0])
        keep = merged >= config.ATOM_DROP_THRESHOLD
        if not np.any(keep):
            raise InvalidInputError("合并后没有剩余质量")
        unique_locs, merged = unique_locs[keep], merged[keep]
        merged = merged / stable_sum(merged)

        unique_locs.setflags(write=False)
        merged.setflags(write=False)
        self.locations: np.ndarray = unique_locs
        self.weights: np.ndarray = merged
        self.dim: int = int(unique_locs.shape[1])

    @classmethod
    def from_atoms(cls, atoms: Sequence[Atom]) -> "DiscreteMeasure":
        if not atoms:
            raise InvalidInputError("离散测度至少需要一个原子")
        return cls([a.location for a in atoms], [a.weight for a in atoms], dim=len(atoms[0].location))

    @classmethod
    def dirac(cls, point) -> "DiscreteMeasure":
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return cls(point.reshape(1, -1), [1.0])

    @property
    def atoms(self) -> List[Atom]:
        return [Atom(tuple(x), float(w)) for x, w in zip(self.locations, self.weights)]

    @property
    def n_atoms(self) -> int:
        return int(self.weights.shape[0])

    def same_atoms(self, other: "DiscreteMeasure", tol: float = 1e-12) -> bool:
        """合并后原子集合是否一致（位置与权重均在容差内）"""
        if self.dim != other.dim or self.n_atoms != other.n_atoms:
            return False
        return bool(np.allclose(self.locations, other.locations, atol=tol, rtol=0)
                    and np.allclose(self.weights, other.weights, atol=tol, rtol=0))

    def __repr__(self):
        return f"DiscreteMeasure(dim={self.dim}, n_atoms={self.n_atoms})"


class DensityMeasure:
    """
    有界支撑盒上的绝对连续测度

    density 接受 (n, d) 数组并返回 (n,) 的非负值；盒外视为 0。
    normalized=False 时按求积结果归一化。
    """

    def __init__(
        self,
        density: Callable[[np.ndarray], np.ndarray],
        support_box: Tuple[Sequence[float], Sequence[float]],
        quadrature: Optional[QuadratureSpec] = None,
        density_max: Optional[float] = None,
        normalized: bool = False,
        name: str = "density",
    ):
        """
        Args:
            density: 密度求值函数
            support_box: (lower, upper) 轴对齐支撑盒
            quadrature: 求积设置，None 表示按维数取默认
            density_max: 密度上界（拒绝采样用）；None 表示由求积节点估计
            normalized: 密度是否已精确归一化
            name: 名称（日志用）
        """
        lower = np.atleast_1d(np.asarray(support_box[0], dtype=float))
        upper = np.atleast_1d(np.asarray(support_box[1], dtype=float))
        if lower.shape != upper.shape or np.any(upper <= lower) or not np.all(np.isfinite(upper - lower)):
            raise InvalidInputError("支撑盒必须有界且非退化")
        lower.setflags(write=False)
        upper.setflags(write=False)
        self.lower = lower
        self.upper = upper
        self.dim = int(lower.shape[0])
        self.name = name
        self.quadrature = quadrature or QuadratureSpec.default_for(self.dim)
        self._raw_density = density
        self._normalizer = 1.0

        if not normalized:
            result = self._integrate_raw(lambda x: np.ones(x.shape[0]), self.quadrature)
            if not (result.value > 0 and math.isfinite(result.value)):
                raise InvalidInputError(f"密度 {name} 在支撑盒上的积分必须为正且有限")
            self._normalizer = result.value
            logger.info(f"[Measure] {name} 归一化常数 {result.value:.12g}（误差估计 {result.error:.3g}）")

        if density_max is None:
            nodes, _ = self._nodes(self.quadrature)
            density_max = 1.5 * float(np.max(self.evaluate(nodes)))
        self.density_max = float(density_max)

    @property
    def support_box(self) -> Box:
        return self.lower, self.upper

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def evaluate(self, points) -> np.ndarray:
        """归一化后的密度值；盒外为 0"""
        x = as_points(points, self.dim)
        values = np.asarray(self._raw_density(x), dtype=float).reshape(-1) / self._normalizer
        inside = np.all((x >= self.lower) & (x <= self.upper), axis=1)
        values = np.where(inside, values, 0.0)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InvalidInputError(f"密度 {self.name} 出现负值或非有限值")
        return values

    def _nodes(self, spec: QuadratureSpec) -> Tuple[np.ndarray, np.ndarray]:
        """支撑盒上的求积节点与（不含密度的）权重"""
        if spec.method == QuadratureMethod.TENSOR_GRID:
            return gauss_legendre_box(self.lower, self.upper, spec.samples_or_nodes_per_axis)
        n = spec.samples_or_nodes_per_axis
        chunks = []
        for index, piece in enumerate(iter_slices(n, config.SAMPLING_CHUNK)):
            rng = rng_for_chunk(spec.seed, index)
            chunks.append(rng.uniform(self.lower, self.upper, size=(piece.stop - piece.start, self.dim)))
        return np.concatenate(chunks), np.full(n, self.volume / n)

    def _integrate_raw(self, integrand: Callable[[np.ndarray], np.ndarray], spec: QuadratureSpec
                       ) -> QuadratureResult:
        def estimate(s: QuadratureSpec):
            nodes, weights = self._nodes(s)
            raw = np.asarray(self._raw_density(nodes), dtype=float).reshape(-1)
            return nodes, weights * raw * integrand(nodes)

        nodes, terms = estimate(spec)
        value = stable_sum(terms)
        if spec.method == QuadratureMethod.TENSOR_GRID:
            _, coarse = estimate(spec.coarsened())
            error = abs(value - stable_sum(coarse))
        else:
            n = terms.shape[0]
            error = float(np.std(terms * n) / math.sqrt(n)) if n > 1 else math.inf
        return QuadratureResult(value, error)

    def integrate(self, integrand: Callable[[np.ndarray], np.ndarray], spec: Optional[QuadratureSpec] = None
                  ) -> QuadratureResult:
        """
        ∫ g(x) f(x) dx 的求积

        Args:
            integrand: g，接受 (n, d) 返回 (n,)
            spec: 求积设置；None 表示用测度自带设置

        Returns:
            QuadratureResult: 数值与误差估计
        """
        result = self._integrate_raw(integrand, spec or self.quadrature)
        return QuadratureResult(result.value / self._normalizer, result.error / self._normalizer)

    def quadrature_atoms(self, spec: Optional[QuadratureSpec] = None) -> Tuple[np.ndarray, np.ndarray]:
        """求积节点与密度加权后的权重（未归一化到 1）"""
        nodes, weights = self._nodes(spec or self.quadrature)
        return nodes, weights * self.evaluate(nodes)

    def __repr__(self):
        return f"DensityMeasure(name={self.name!r}, dim={self.dim})"


class Mixture:
    """有限混合 Σ w_i μ_i，权重为正且和为 1，组件维数一致"""

    def __init__(self, components: Sequence[Tuple[float, "Measure"]]):
        if not components:
            raise InvalidInputError("混合测度至少需要一个组件")
        weights = np.array([float(w) for w, _ in components])
        if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
            raise InvalidInputError("混合权重必须为正")
        total = stable_sum(weights)
        if abs(total - 1.0) > 1e-6:
            raise InvalidInputError(f"混合权重之和为 {total}，应为 1")
        dims = {measure_dim(m) for _, m in components}
        if len(dims) != 1:
            raise InvalidInputError(f"混合组件维数不一致: {sorted(dims)}")
        self.components: Tuple[Tuple[float, "Measure"], ...] = tuple(
            (float(w) / total, m) for (_, m), w in zip(components, weights)
        )
        self.dim: int = dims.pop()
        if mixture_depth(self) > config.MAX_MIXTURE_DEPTH:
            raise InvalidInputError(f"混合深度超过 {config.MAX_MIXTURE_DEPTH}")

    def __repr__(self):
        return f"Mixture(dim={self.dim}, components={len(self.components)})"


Measure = Union[DiscreteMeasure, DensityMeasure, Mixture]


# ==========================================
# 基本查询
# ==========================================

def measure_dim(measure: Measure) -> int:
    return int(measure.dim)


def mixture_depth(measure: Measure) -> int:
    if isinstance(measure, Mixture):
        return 1 + max(mixture_depth(m) for _, m in measure.components)
    return 0


def total_mass(measure: Measure) -> float:
    """总质量（离散精确，密度由求积给出）"""
    if isinstance(measure, DiscreteMeasure):
        return stable_sum(measure.weights)
    if isinstance(measure, DensityMeasure):
        return measure.integrate(lambda x: np.ones(x.shape[0])).value
    return math.fsum(w * total_mass(m) for w, m in measure.components)


def support_box(measure: Measure) -> Box:
    """包含支撑的轴对齐盒子"""
    if isinstance(measure, DiscreteMeasure):
        return measure.locations.min(axis=0), measure.locations.max(axis=0)
    if isinstance(measure, DensityMeasure):
        return measure.lower.copy(), measure.upper.copy()
    boxes = [support_box(m) for _, m in measure.components]
    return np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0)


def support_radius(measure: Measure) -> float:
    """sup{|x| : x ∈ supp μ} 的上界（离散精确，密度取支撑盒角点）"""
    if isinstance(measure, DiscreteMeasure):
        return float(np.max(np.linalg.norm(measure.locations, axis=1)))
    if isinstance(measure, DensityMeasure):
        corner = np.maximum(np.abs(measure.lower), np.abs(measure.upper))
        return float(np.linalg.norm(corner))
    return max(support_radius(m) for _, m in measure.components)


# ==========================================
# 矩
# ==========================================

def moment_with_error(measure: Measure, p: float) -> QuadratureResult:
    """
    p 阶矩 M_p(μ) = ∫|x|^p dμ 及误差估计

    Args:
        measure: 测度
        p: 阶数（≥ 1）

    Returns:
        QuadratureResult: 离散测度误差为 0
    """
    if not p >= 1:
        raise InvalidInputError(f"矩阶数 p 必须 ≥ 1，当前 {p}")
    if isinstance(measure, DiscreteMeasure):
        norms = np.linalg.norm(measure.locations, axis=1)
        result = QuadratureResult(stable_sum(measure.weights * norms ** p), 0.0)
    elif isinstance(measure, DensityMeasure):
        result = measure.integrate(lambda x: np.linalg.norm(x, axis=1) ** p)
    else:
        parts = [(w, moment_with_error(m, p)) for w, m in measure.components]
        result = QuadratureResult(math.fsum(w * r.value for w, r in parts),
                                  math.fsum(w * r.error for w, r in parts))
    if not math.isfinite(result.value):
        raise MomentDivergenceError(f"{p} 阶矩不是有限值")
    return result


def moment(measure: Measure, p: float) -> float:
    """M_p(μ)"""
    return moment_with_error(measure, p).value


# ==========================================
# 采样
# ==========================================

def _derived_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, dtype=np.uint64)[0])


def _sample_density(measure: DensityMeasure, n: int, seed: int) -> np.ndarray:
    """拒绝采样：盒内均匀提议，按 f/f_max 接受"""
    out = []
    min_attempts = int(10 / config.MIN_ACCEPTANCE_RATE)
    for index, piece in enumerate(iter_slices(n, config.SAMPLING_CHUNK)):
        need = piece.stop - piece.start
        rng = rng_for_chunk(seed, index)
        accepted, attempts = [], 0
        got = 0
        while got < need:
            batch = max(4 * (need - got), 4096)
            proposals = rng.uniform(measure.lower, measure.upper, size=(batch, measure.dim))
            ratio = measure.evaluate(proposals) / measure.density_max
            keep = rng.uniform(size=batch) < ratio
            attempts += batch
            accepted.append(proposals[keep])
            got += int(keep.sum())
            if attempts >= min_attempts and got / attempts < config.MIN_ACCEPTANCE_RATE:
                raise SamplerInefficiencyError(
                    f"{measure.name} 拒绝采样接受率 {got / attempts:.3g} 低于 {config.MIN_ACCEPTANCE_RATE}"
                )
        out.append(np.concatenate(accepted)[:need])
    return np.concatenate(out)


def sample(measure: Measure, n: int, seed: int = 0) -> np.ndarray:
    """
    从测度中独立同分布采样 n 个点

    相同的 (measure, n, seed) 给出逐位相同的结果

    Args:
        measure: 测度
        n: 样本数
        seed: 随机种子

    Returns:
        np.ndarray: (n, d) 样本
    """
    if n < 1:
        raise InvalidInputError("样本数必须为正")
    if isinstance(measure, DiscreteMeasure):
        out = []
        for index, piece in enumerate(iter_slices(n, config.SAMPLING_CHUNK)):
            rng = rng_for_chunk(seed, index)
            idx = rng.choice(measure.n_atoms, size=piece.stop - piece.start, p=measure.weights)
            out.append(measure.locations[idx])
        return np.concatenate(out)
    if isinstance(measure, DensityMeasure):
        return _sample_density(measure, n, seed)

    rng = rng_for_chunk(seed, 0)
    weights = np.array([w for w, _ in measure.components])
    counts = rng.multinomial(n, weights / weights.sum())
    parts = [
        sample(component, int(count), _derived_seed(seed, i + 1))
        for i, ((_, component), count) in enumerate(zip(measure.components, counts))
        if count > 0
    ]
    points = np.concatenate(parts)
    return points[rng.permutation(n)]


# ==========================================
# 推前与离散化
# ==========================================

def _apply_map(mapping: Callable, points: np.ndarray) -> np.ndarray:
    mapped = [np.atleast_1d(np.asarray(mapping(x), dtype=float)) for x in points]
    return np.vstack(mapped)


def pushforward(measure: Measure, mapping: Callable, seed: int = 0,
                surrogate_size: Optional[int] = None) -> Measure:
    """
    推前测度 T_♯μ

    离散测度精确重定位并合并原子；密度测度先采样 surrogate_size 个点
    （默认 config.PUSHFORWARD_SAMPLES）得到离散代理再映射。

    Args:
        measure: 测度
        mapping: 点到点的映射
        seed: 密度代理的采样种子
        surrogate_size: 代理原子数

    Returns:
        Measure: 推前测度
    """
    if isinstance(measure, DiscreteMeasure):
        return DiscreteMeasure(_apply_map(mapping, measure.locations), measure.weights)
    if isinstance(measure, DensityMeasure):
        size = surrogate_size or config.PUSHFORWARD_SAMPLES
        logger.info(f"[Measure] {measure.name} 推前使用 {size} 点样本代理")
        points = sample(measure, size, seed)
        return DiscreteMeasure(_apply_map(mapping, points))
    return Mixture([
        (w, pushforward(m, mapping, _derived_seed(seed, i + 1), surrogate_size))
        for i, (w, m) in enumerate(measure.components)
    ])


def discretize(measure: Measure, spec: Optional[QuadratureSpec] = None) -> DiscreteMeasure:
    """
    把测度转换成离散代理（密度用求积节点，离散测度原样返回）

    Args:
        measure: 测度
        spec: 密度组件的求积设置；None 表示各组件自带设置

    Returns:
        DiscreteMeasure: 代理测度
    """
    if isinstance(measure, DiscreteMeasure):
        return measure
    if isinstance(measure, DensityMeasure):
        nodes, weights = measure.quadrature_atoms(spec)
        keep = weights > 0
        return DiscreteMeasure(nodes[keep], weights[keep])
    locs, weights = [], []
    for w, component in measure.components:
        part = discretize(component, spec)
        locs.append(part.locations)
        weights.append(w * part.weights)
    return DiscreteMeasure(np.concatenate(locs), np.concatenate(weights))


# ==========================================
# 内置测度族
# ==========================================

def uniform_cube(dim: int, center=None, side: float = 1.0,
                 quadrature: Optional[QuadratureSpec] = None) -> DensityMeasure:
    """中心 center、边长 side 的立方体上的均匀分布"""
    if not side > 0:
        raise InvalidInputError(f"side 必须为正，当前 {side}")
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    lower, upper = center - side / 2.0, center + side / 2.0
    value = 1.0 / side ** dim
    return DensityMeasure(
        lambda x: np.full(x.shape[0], value),
        (lower, upper),
        quadrature=quadrature,
        density_max=value,
        normalized=True,
        name=f"uniform_cube(d={dim})",
    )


def truncated_gaussian(dim: int, sigma: float = 1.0, mean=None,
                       truncation: float = config.GAUSSIAN_TRUNCATION,
                       quadrature: Optional[QuadratureSpec] = None) -> DensityMeasure:
    """
    截断到 mean ± truncation·σ 盒子的各向同性高斯，按盒内质量精确归一化
    """
    if sigma <= 0 or truncation <= 0:
        raise InvalidInputError("sigma 与 truncation 必须为正")
    mean = np.zeros(dim) if mean is None else np.asarray(mean, dtype=float)
    box_mass = float((norm.cdf(truncation) - norm.cdf(-truncation)) ** dim)

    def density(x: np.ndarray) -> np.ndarray:
        return np.prod(norm.pdf(x, loc=mean, scale=sigma), axis=1) / box_mass

    peak = float(norm.pdf(0.0, scale=sigma) ** dim / box_mass)
    return DensityMeasure(
        density,
        (mean - truncation * sigma, mean + truncation * sigma),
        quadrature=quadrature,
        density_max=peak,
        normalized=True,
        name=f"gaussian(d={dim}, sigma={sigma})",
    )


def circle_arc(radius: float = 0.4, start_angle: float = 0.0, end_angle: float = 2 * math.pi,
               n_atoms: int = config.CIRCLE_ARC_ATOMS, center=(0.0, 0.0)) -> DiscreteMeasure:
    """
    R² 中圆弧上的均匀（奇异）测度，用沿弧等距分布的原子表示
    """
    if radius <= 0 or n_atoms < 1 or end_angle <= start_angle:
        raise InvalidInputError("circle_arc 参数无效")
    angles = start_angle + (np.arange(n_atoms) + 0.5) * (end_angle - start_angle) / n_atoms
    points = np.asarray(center, dtype=float) + radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return DiscreteMeasure(points)
