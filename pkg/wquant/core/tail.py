#!/usr/bin/env python3
"""
尾部截断 - 球投影 P_{B_R} 与三个衰减条件的数值检查

测度 μ 分成绝对连续部分（密度探针）、奇异连续部分（整数壳层质量）和原子部分，
分别对应条件 (1)(2)(3) 与积分 I₁, I₂, I₃
"""
import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import zeta
from scipy.stats import norm, qmc

from ..errors import InvalidInputError, MomentDivergenceError
from .measures import Atom, DensityMeasure, DiscreteMeasure, Measure, Mixture, pushforward, support_radius
from .models import ShellMassSpec, TailDecaySpec, TruncationReport
from .utils import as_points, sphere_surface_area, stable_sum

logger = logging.getLogger(__name__)

Probe = Callable[[np.ndarray], np.ndarray]

PROBE_RADII = 64
MAX_PROBE_RADII = 4096
PROBE_DIRECTIONS = 256


class DensityEvaluator:
    """
    密度组件按混合权重相加的求值器，附带密度支撑半径的上界

    Attributes:
        support_radius: |x| 超过该值时密度为 0，条件 (1) 的径向网格至少延伸到这里
    """

    def __init__(self, densities: Sequence[Tuple[float, DensityMeasure]]):
        self.densities = list(densities)
        self.dim = self.densities[0][1].dim
        self.support_radius = max(support_radius(d) for _, d in self.densities)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        x = as_points(points, self.dim)
        return sum(w * d.evaluate(x) for w, d in self.densities)

    def __repr__(self) -> str:
        return f"DensityEvaluator(components={len(self.densities)}, support_radius={self.support_radius:.6g})"


def _project_points(points: np.ndarray, R: float) -> np.ndarray:
    norms = np.linalg.norm(points, axis=1, keepdims=True)
    scale = np.where(norms > R, R / np.where(norms > 0, norms, 1.0), 1.0)
    return points * scale


def project_to_ball(measure: Measure, R: float, seed: int = 0) -> Measure:
    """
    推前 (P_{B_R})_♯μ：|x| ≤ R 不动，|x| > R 映到 R·x/|x|

    离散测度精确；支撑已在球内的测度原样返回；其余密度测度用 pushforward 的样本代理

    Args:
        measure: 测度
        R: 球半径（> 0）
        seed: 密度代理的采样种子

    Returns:
        Measure: 投影后的测度
    """
    if not R > 0:
        raise InvalidInputError(f"R 必须为正，当前 {R}")
    if isinstance(measure, DiscreteMeasure):
        return DiscreteMeasure(_project_points(np.asarray(measure.locations), R), measure.weights)
    if support_radius(measure) <= R:
        return measure
    if isinstance(measure, DensityMeasure):
        return pushforward(measure, lambda x: _project_points(np.atleast_2d(x), R)[0], seed)
    return Mixture([(w, project_to_ball(m, R, seed + i + 1)) for i, (w, m) in enumerate(measure.components)])


def _excess_integral(measure: Measure, R: float, p: float) -> float:
    if isinstance(measure, DiscreteMeasure):
        excess = np.clip(np.linalg.norm(measure.locations, axis=1) - R, 0.0, None)
        return stable_sum(measure.weights * excess ** p)
    if isinstance(measure, DensityMeasure):
        return measure.integrate(lambda x: np.clip(np.linalg.norm(x, axis=1) - R, 0.0, None) ** p).value
    return math.fsum(w * _excess_integral(m, R, p) for w, m in measure.components)


def truncation_error(measure: Measure, R: float, p: float) -> float:
    """
    (∫_{|x|>R} (|x| − R)^p dμ)^{1/p}，是 W_p(μ, P_{B_R♯}μ) 的上界

    Args:
        measure: 测度
        R: 球半径
        p: 指数（≥ 1）

    Returns:
        float: 截断误差
    """
    if not (R > 0 and p >= 1):
        raise InvalidInputError("truncation_error 需要 R > 0, p ≥ 1")
    value = _excess_integral(measure, R, p)
    if not math.isfinite(value):
        raise MomentDivergenceError(f"截断积分在 R = {R}, p = {p} 时发散")
    return max(value, 0.0) ** (1.0 / p)


# ==========================================
# 衰减条件
# ==========================================

def _probe_directions(dim: int) -> np.ndarray:
    """单位球面上的确定性方向集"""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        angles = 2 * np.pi * np.arange(PROBE_DIRECTIONS) / PROBE_DIRECTIONS
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    # Halton 点经正态分位数映射后归一化
    raw = qmc.Halton(dim, scramble=False).random(PROBE_DIRECTIONS + 1)[1:]
    gauss = norm.ppf(np.clip(raw, 1e-12, 1 - 1e-12))
    return gauss / np.linalg.norm(gauss, axis=1, keepdims=True)


def _evaluate_probe(probe: Probe, points: np.ndarray) -> np.ndarray:
    try:
        values = np.asarray(probe(points), dtype=float).reshape(-1)
    except Exception as exc:
        raise InvalidInputError(f"密度探针求值失败: {exc}") from exc
    if values.shape[0] != points.shape[0] or np.any(values < 0) or not np.all(np.isfinite(values)):
        raise InvalidInputError("密度探针必须对每个点返回非负有限值")
    return values


def _check_density(probe: Probe, spec: TailDecaySpec, constant: float, r_max: float) -> Tuple[bool, float, float, dict]:
    """条件 (1)：径向 × 角向网格上 f(x) ≤ ε^p / (3C|x|^{p+d+1})"""
    p, R, d = spec.p, spec.R, spec.dim
    n_radii = int(min(MAX_PROBE_RADII, max(PROBE_RADII, math.ceil(PROBE_RADII * (r_max - R) / R))))
    radii = np.linspace(R, r_max, n_radii)
    directions = _probe_directions(d)
    points = (radii[:, None, None] * directions[None, :, :]).reshape(-1, d)
    values = _evaluate_probe(probe, points).reshape(radii.shape[0], directions.shape[0])
    threshold = spec.epsilon ** p / (3.0 * constant * radii ** (p + d + 1))
    slack = threshold[:, None] - values
    worst = np.unravel_index(np.argmin(slack), slack.shape)
    passed = bool(np.all(values <= threshold[:, None] * (1.0 + 1e-12)))
    if passed:
        # ∫_R^∞ (r−R)^p r^{−p−2} dr = 1/(R(p+1))
        bound = spec.epsilon ** p / (3.0 * R * (p + 1.0))
    else:
        radial = np.mean(values, axis=1) * sphere_surface_area(d) * radii ** (d - 1) * (radii - R) ** p
        bound = float(trapezoid(radial, radii))
    margin = {"min_slack": float(slack[worst]), "worst_radius": float(radii[worst[0]]),
              "worst_point": points.reshape(radii.shape[0], -1, d)[worst].tolist()}
    return passed, bound, float(slack[worst]), margin


def _check_shells(shells: ShellMassSpec, spec: TailDecaySpec) -> Tuple[bool, float, dict]:
    """条件 (2)：j ≥ ⌊R⌋ 的壳层质量 ≤ ε^p·6 / (3π²(j+1−R)^{p+2})"""
    p, R = spec.p, spec.R
    first = int(math.floor(R))
    offending, slack, integral = [], math.inf, []
    for j, mass in shells.shell_masses.items():
        if j < first:
            continue
        width = j + 1.0 - R
        threshold = spec.epsilon ** p * 6.0 / (3.0 * math.pi ** 2 * width ** (p + 2))
        slack = min(slack, threshold - mass)
        if mass > threshold * (1.0 + 1e-12):
            offending.append(j)
        integral.append(width ** p * mass)
    bound = math.fsum(integral)
    return not offending, bound, {"min_slack": slack if math.isfinite(slack) else None, "offending_shells": offending}


def _check_atoms(atoms: Sequence[Atom], spec: TailDecaySpec) -> Tuple[bool, float, dict]:
    """条件 (3)：按 c_k(|x_k|−R)^p 降序编号，c_k ≤ ε^p/(3ζ(q)) · k^{−q} · (|x_k|−R)^{−p}"""
    p, R, q = spec.p, spec.R, spec.q
    outside = [(a.weight, float(np.linalg.norm(a.location)) - R) for a in atoms
               if float(np.linalg.norm(a.location)) > R]
    outside.sort(key=lambda item: -item[0] * item[1] ** p)
    z = float(zeta(q))
    offending, slack, integral = [], math.inf, []
    for k, (weight, excess) in enumerate(outside, start=1):
        threshold = spec.epsilon ** p / (3.0 * z) * k ** (-q) * excess ** (-p)
        slack = min(slack, threshold - weight)
        if weight > threshold * (1.0 + 1e-12):
            offending.append(k)
        integral.append(excess ** p * weight)
    bound = math.fsum(integral)
    return not offending, bound, {"min_slack": slack if math.isfinite(slack) else None, "offending_atoms": offending,
                                  "n_outside": len(outside)}


def _atom_list(atoms: Union[None, DiscreteMeasure, Sequence[Atom]]) -> List[Atom]:
    if atoms is None:
        return []
    if isinstance(atoms, DiscreteMeasure):
        return atoms.atoms
    return list(atoms)


def _probe_extent(probe: Probe, r_max: Optional[float]) -> float:
    """条件 (1) 径向网格的外端：不短于探针的支撑半径"""
    bound = getattr(probe, "support_radius", None)
    if r_max is None:
        if bound is None:
            raise InvalidInputError("密度探针没有支撑半径，必须给出 r_max")
        return float(bound)
    r_max = float(r_max)
    if not math.isfinite(r_max):
        raise InvalidInputError(f"r_max 必须有限，当前 {r_max}")
    if bound is not None and r_max < bound:
        logger.warning(f"[Tail] r_max = {r_max:.6g} 小于密度支撑半径 {bound:.6g}，网格延伸到支撑半径")
        return float(bound)
    return r_max


def check_decay_conditions(f_bound_probe: Optional[Probe], shells: Optional[ShellMassSpec],
                           atoms: Union[None, DiscreteMeasure, Sequence[Atom]], spec: TailDecaySpec,
                           r_max: Optional[float] = None) -> TruncationReport:
    """
    检查尾部衰减条件，并给出 I₁, I₂, I₃ 的上界

    条件 (1) 在 |x| ∈ [R, r_max] 的径向 × 角向网格上检查，r_max 之外视密度为 0。
    DensityEvaluator 自带支撑半径，r_max 至少取到该值；其他探针必须显式给出 r_max。
    r_max ≤ R 时密度在球外为 0，I₁ = 0；通过时 I₁ ≤ ε^p/(3R(p+1))，否则给出网格上的数值估计。
    I₂ = Σ_{j≥⌊R⌋} (j+1−R)^p μ⊥(shell_j)，I₃ = Σ (|x_k|−R)^p c_k 直接求和。

    Args:
        f_bound_probe: 绝对连续部分的密度求值器（None 表示没有该部分）
        shells: 奇异连续部分的壳层质量
        atoms: 原子部分（Atom 列表保持原始权重；DiscreteMeasure 为归一化权重）
        spec: 条件参数
        r_max: 条件 (1) 的径向网格外端（密度在 |x| > r_max 处为 0）

    Returns:
        TruncationReport: 检查结果
    """
    p, R = spec.p, spec.R
    constant = spec.sphere_constant if spec.sphere_constant is not None else sphere_surface_area(spec.dim)
    notes = [
        "condition (3) normalized by 1/zeta(q) = 1/sum_l l^(-q)",
        "condition (2) sums shells j >= floor(R), including the partial shell [R, floor(R)+1]",
    ]
    margins = {}

    if f_bound_probe is None:
        pass_ac, bound_ac = True, 0.0
        margins["density"] = {"min_slack": None}
    else:
        r_max = _probe_extent(f_bound_probe, r_max)
        if r_max <= R:
            pass_ac, bound_ac = True, 0.0
            margins["density"] = {"min_slack": None, "r_max": r_max}
        else:
            pass_ac, bound_ac, _, margins["density"] = _check_density(f_bound_probe, spec, constant, r_max)
            margins["density"]["r_max"] = r_max

    pass_sc, bound_sc, margins["shells"] = _check_shells(shells or ShellMassSpec(), spec)
    atom_list = _atom_list(atoms)
    if atom_list and len(atom_list[0].location) != spec.dim:
        raise InvalidInputError("原子维数与 spec.dim 不一致")
    pass_at, bound_at, margins["atoms"] = _check_atoms(atom_list, spec)

    guaranteed = True
    if f_bound_probe is not None and R * (p + 1.0) < 1.0:
        guaranteed = False
        notes.append("R(p+1) < 1: condition (1) alone does not give I1 <= eps^p/3")
    has_shells = any(j >= math.floor(R) and m > 0 for j, m in (shells or ShellMassSpec()).shell_masses.items())
    if has_shells and not float(R).is_integer():
        guaranteed = False
        notes.append("non-integer R: the shell series exceeds pi^2/6, condition (2) alone does not give I2 <= eps^p/3")

    total = math.fsum([bound_ac, bound_sc, bound_at])
    if not math.isfinite(total):
        raise MomentDivergenceError("尾部积分上界不是有限值")
    report = TruncationReport(
        bound_ac=bound_ac,
        bound_sc=bound_sc,
        bound_atomic=bound_at,
        total_bound=total ** (1.0 / p),
        conditions_pass=(pass_ac, pass_sc, pass_at),
        margins=margins,
        notes=notes,
        implication_guaranteed=guaranteed,
    )
    logger.info(f"[Tail] 条件 (1)(2)(3) = {report.conditions_pass}，total_bound = {report.total_bound:.6g}"
                f"（ε = {spec.epsilon}）")
    return report


def decay_inputs(measure: Measure, R: float) -> Tuple[Optional[DensityEvaluator], List[Atom]]:
    """
    从测度中拆出密度探针（各密度组件按混合权重相加）和 |x| > R 的原子（按混合权重缩放）

    Args:
        measure: 测度
        R: 球半径

    Returns:
        (probe, atoms): probe 是带支撑半径的 DensityEvaluator，没有密度组件时为 None
    """
    densities: List[Tuple[float, DensityMeasure]] = []
    atoms: List[Atom] = []

    def walk(m: Measure, weight: float):
        if isinstance(m, DensityMeasure):
            densities.append((weight, m))
        elif isinstance(m, DiscreteMeasure):
            norms = np.linalg.norm(m.locations, axis=1)
            atoms.extend(Atom(tuple(x), weight * w) for x, w, r in zip(m.locations, m.weights, norms) if r > R)
        else:
            for w, component in m.components:
                walk(component, weight * w)

    walk(measure, 1.0)
    if not densities:
        return None, atoms
    return DensityEvaluator(densities), atoms
