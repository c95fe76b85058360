#!/usr/bin/env python3
"""
实验扫描 - h 扫描、N 项扫描、非均匀站点试验、尾部截断实验

每个扫描点独立计算（确定性），并行执行后按配置顺序汇总；
某个点失败时先写出已完成的部分报告再抛出异常
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Tuple

import numpy as np

from .. import config
from ..core.lattice import Lattice, LatticeKind
from ..core.measures import (DensityMeasure, DiscreteMeasure, Measure, Mixture, discretize, support_box,
                             support_radius)
from ..core.models import ApproximantMode, TailDecaySpec
from ..core.ot_exact import wasserstein_1d, wasserstein_lp
from ..core.quantize import (Approximant, NtermHypothesisReport, cell_node_set, choose_h_for_budget,
                             coupling_cost, dirac_realization, mesh_norm, moment_bound_suite,
                             quantize_lattice, quantize_nonuniform, realize, separation_radius, term_count)
from ..core.tail import check_decay_conditions, decay_inputs, project_to_ball, truncation_error
from ..errors import InvalidInputError
from .report import SweepReport, SweepRow
from .specs import SweepConfig, generate_sites

logger = logging.getLogger(__name__)

Flush = Optional[Callable[[SweepReport], None]]
Builder = Callable[[int], Approximant]


# ==========================================
# 单点计算
# ==========================================

def has_density(measure: Measure) -> bool:
    if isinstance(measure, DensityMeasure):
        return True
    if isinstance(measure, Mixture):
        return any(has_density(m) for _, m in measure.components)
    return False


def exact_distance(source: DiscreteMeasure, target: DiscreteMeasure, p: float,
                   nearest_site_value: Optional[float] = None) -> Tuple[Optional[float], str]:
    """
    扫描中的精确 W_p

    d = 1 用分位数解法；规模允许时用网络单纯形；否则若给出了最近站点耦合的代价
    （dirac 模式下它就是代理测度的最优耦合）直接采用，再否则只报告上界

    Returns:
        (value, method): method ∈ quantile / network_simplex / nearest_site / bound_only
    """
    if source.dim == 1:
        return wasserstein_1d(source, target, p), "quantile"
    if source.n_atoms * target.n_atoms <= min(config.HARNESS_LP_PAIRS, config.LP_MAX_PAIRS):
        value, _ = wasserstein_lp(source, target, p)
        return value, "network_simplex"
    if nearest_site_value is not None:
        return nearest_site_value, "nearest_site"
    logger.info(f"[Sweep] {source.n_atoms}×{target.n_atoms} 超过 LP 规模上限，该行只报告上界")
    return None, "bound_only"


def coupled_target(measure: Measure, approximant: Approximant, p: float) -> Tuple[DiscreteMeasure, float]:
    """
    近似测度的离散实现及显式耦合代价

    indicator 模式的耦合与实现共用同一组 Halton 胞元节点，保证实测值不超过耦合代价
    """
    if approximant.mode == ApproximantMode.DIRAC:
        return dirac_realization(approximant), coupling_cost(measure, approximant, p)
    nodes = cell_node_set(approximant, "halton")
    return realize(approximant, nodes), coupling_cost(measure, approximant, p, nodes)


def evaluate_point(measure: Measure, build: Builder, p: float, parameter: float, seed: int,
                   theoretical: float, discretization: bool = True) -> Tuple[SweepRow, Approximant]:
    """
    量化一次并记录 实测 ≤ 耦合 ≤ 理论 三者

    Args:
        measure: 测度
        build: refine → Approximant 的量化函数
        p: 代价指数
        parameter: 该行的 h 或 N
        seed: 该行的种子
        theoretical: 理论上界
        discretization: 是否用加密求积估计离散化误差（仅含密度的测度）

    Returns:
        (row, approximant)
    """
    approximant = build(1)
    target, coupling = coupled_target(measure, approximant, p)
    source = approximant.surrogate.as_measure()
    nearest = coupling if approximant.mode == ApproximantMode.DIRAC else None
    measured, method = exact_distance(source, target, p, nearest)

    extra = {"n_cells": approximant.n_cells,
             "max_cell_error": float(np.max(approximant.cell_errors)),
             "discretization_error": 0.0}
    if discretization and has_density(measure):
        _, refined = coupled_target(measure, build(2), p)
        extra["discretization_error"] = abs(refined - coupling)

    row = SweepRow(
        parameter=float(parameter),
        measured_wp=measured,
        coupling_bound=coupling,
        theoretical_bound=theoretical,
        terms=term_count(approximant),
        seed=int(seed),
        exact_method=method,
        checks=bound_checks(measured, coupling, theoretical),
        extra=extra,
    )
    return row, approximant


def bound_checks(measured: Optional[float], coupling: float, theoretical: float) -> dict:
    checks = {"coupling_le_theoretical": coupling <= theoretical + config.BOUND_TOLERANCE}
    if measured is not None:
        checks["measured_le_coupling"] = measured <= coupling + config.MEASURED_TOLERANCE
    return checks


def lattice_builder(measure: Measure, lattice: Lattice, h: float, mode: ApproximantMode) -> Builder:
    return lambda refine: quantize_lattice(measure, lattice, h, mode, refine)


def sites_builder(measure: Measure, sites: np.ndarray, mode: ApproximantMode) -> Builder:
    return lambda refine: quantize_nonuniform(measure, sites, mode, refine)


# ==========================================
# 并行执行
# ==========================================

def run_tasks(tasks: List[Callable[[], SweepRow]], jobs: int) -> Tuple[List[SweepRow], Optional[BaseException]]:
    """
    并行执行扫描点，结果按提交顺序收集

    Returns:
        (rows, error): 第一个失败点之前的结果，以及该失败（没有失败时为 None）
    """
    rows: List[SweepRow] = []
    if jobs <= 1:
        for task in tasks:
            try:
                rows.append(task())
            except Exception as exc:
                return rows, exc
        return rows, None
    pool = ThreadPoolExecutor(max_workers=jobs)
    try:
        futures = [pool.submit(task) for task in tasks]
        for future in futures:
            try:
                rows.append(future.result())
            except Exception as exc:
                return rows, exc
        return rows, None
    finally:
        pool.shutdown(wait=True, cancel_futures=True)


def finish_report(report: SweepReport, error: Optional[BaseException], flush: Flush) -> SweepReport:
    if error is not None:
        report.partial = True
        report.notes.append(f"partial report: {type(error).__name__}: {error}")
        logger.error(f"[Sweep] {report.name} 在第 {len(report.rows) + 1} 个点失败: {error}")
        if flush is not None:
            flush(report)
        raise error
    report.fit()
    status = "通过" if report.passed else f"未通过 {len(report.failures)} 项"
    slope = f"，斜率 {report.slope.slope:.4f}（{report.slope_source}）" if report.slope else ""
    logger.info(f"[Sweep] {report.name}: {len(report.rows)} 行{slope}，{status}")
    return report


# ==========================================
# h 扫描
# ==========================================

def run_h_sweep(cfg: SweepConfig, flush: Flush = None) -> SweepReport:
    """
    格量化的 h 扫描：每个 h 记录实测 W_p、耦合代价与界 diam(V_0)·h，并拟合 log W_p ~ log h

    Args:
        cfg: 扫描配置（values 为严格递减的 h）
        flush: 失败时写出部分报告的回调

    Returns:
        SweepReport: 扫描结果
    """
    measure = cfg.build_measure()
    lattice = cfg.build_lattice(measure.dim)
    geometry = lattice.geometry
    tasks = [
        (lambda h=h: evaluate_point(measure, lattice_builder(measure, lattice, h, cfg.mode), cfg.p,
                                    h, cfg.seed, geometry.diameter * h)[0])
        for h in cfg.values
    ]
    logger.info(f"[Sweep] {cfg.name}: h 扫描 {len(tasks)} 点，{lattice}，mode={cfg.mode.value}，p={cfg.p}")
    rows, error = run_tasks(tasks, cfg.jobs)
    report = SweepReport(cfg.name, cfg.command, "h", rows, slope_window=cfg.slope_window,
                         extra={"lattice": lattice.to_dict(), "diameter": geometry.diameter,
                                "covering_radius": geometry.covering_radius})
    return finish_report(report, error, flush)


# ==========================================
# N 项扫描
# ==========================================

def _cube_root(n: float, d: int) -> int:
    m = int(round(n ** (1.0 / d)))
    if m < 1 or m ** d != int(n):
        raise InvalidInputError(f"N = {int(n)} 不是 {d} 次方数")
    return m


def run_nterm_sweep(cfg: SweepConfig, flush: Flush = None) -> SweepReport:
    """
    单位立方体上的 N 项量化：Λ_N = (N^{−1/d} Z)^d，界 √d·N^{−1/d}

    支撑严格位于开立方体内时断言项数 ≤ N，否则项数只做记录

    Args:
        cfg: 扫描配置（values 为严格递增的 d 次方数 N）
        flush: 失败时写出部分报告的回调

    Returns:
        SweepReport: 扫描结果，斜率对照 −1/d
    """
    measure = cfg.build_measure()
    d = measure.dim
    if cfg.lattice_spec is not None and cfg.build_lattice(d).kind != LatticeKind.INTEGER:
        raise InvalidInputError("N 项扫描只使用 Z^d")
    lattice = Lattice.integer(d)
    lo, hi = support_box(measure)
    if np.any(lo < -0.5) or np.any(hi > 0.5):
        raise InvalidInputError("N 项扫描要求支撑位于 [−½, ½]^d 内")
    interior = bool(np.all(lo > -0.5) and np.all(hi < 0.5))
    sides = [_cube_root(n, d) for n in cfg.values]

    def point(n: float, m: int) -> SweepRow:
        h = 1.0 / m
        row, _ = evaluate_point(measure, lattice_builder(measure, lattice, h, cfg.mode), cfg.p,
                                n, cfg.seed, math.sqrt(d) * h)
        row.extra["h"] = h
        within = row.terms <= int(n)
        if interior:
            row.checks["terms_le_N"] = within
        else:
            row.extra["terms_within_budget"] = within
        return row

    tasks = [(lambda n=n, m=m: point(n, m)) for n, m in zip(cfg.values, sides)]
    logger.info(f"[Sweep] {cfg.name}: N 项扫描 {len(tasks)} 点，d={d}，mode={cfg.mode.value}，p={cfg.p}")
    rows, error = run_tasks(tasks, cfg.jobs)
    report = SweepReport(cfg.name, cfg.command, "N", rows, slope_window=cfg.slope_window,
                         extra={"expected_slope": -1.0 / d, "interior_support": interior})
    if not interior:
        report.notes.append("support touches the cube boundary: term count recorded, not asserted")
    return finish_report(report, error, flush)


# ==========================================
# 非均匀站点
# ==========================================

def _site_point(measure: Measure, cfg: SweepConfig, n: int, seed: int, box, R: float) -> SweepRow:
    """
    一次非均匀试验：生成站点、网格范数与分离半径、量化，界 2·h_X

    jittered_grid 额外记录 C = h_X·N^{1/d} 与 2C·N^{−1/d}
    """
    d = measure.dim
    sites, used_seed = generate_sites(cfg.sites_spec, n, box, seed)
    h_x = mesh_norm(sites, (np.zeros(d), R))
    q_x = separation_radius(sites) if n >= 2 else None
    row, _ = evaluate_point(measure, sites_builder(measure, sites, cfg.mode), cfg.p, n, used_seed,
                            2.0 * h_x)
    row.extra.update({"mesh_norm": h_x, "separation_radius": q_x,
                      "mesh_ratio": None if q_x is None else h_x / q_x})
    if cfg.sites_spec.get("generator", "jittered_grid") == "jittered_grid":
        n_inside = int(np.count_nonzero(np.linalg.norm(sites, axis=1) <= R))
        C = h_x * n_inside ** (1.0 / d)
        scale = n_inside ** (-1.0 / d)
        hypothesis = NtermHypothesisReport(n_inside, h_x, R * scale, C * scale, 2.0 * C * scale)
        row.extra["C"] = C
        row.extra["hypothesis"] = hypothesis.to_dict()
        value = row.measured_wp if row.measured_wp is not None else row.coupling_bound
        row.checks["measured_le_2C_N"] = value <= hypothesis.bound + config.BOUND_TOLERANCE
    return row


def _trial_seed(cfg: SweepConfig, trial: int) -> int:
    # 每个试验预留一段种子给退化站点集的重新生成
    return cfg.seed + trial * config.SITE_REGENERATE_ATTEMPTS


def run_nonuniform_trial(cfg: SweepConfig, flush: Flush = None) -> SweepReport:
    """
    非均匀站点试验：每个 N 做 trials 次，验证 W_p ≤ 2·h_X

    h_X 在包含支撑的球 B_R(0)（R = 支撑半径）上用可认证网格估计

    Args:
        cfg: 配置（values 为 N，sites_spec 为站点生成器）
        flush: 失败时写出部分报告的回调

    Returns:
        SweepReport: 每个 (N, trial) 一行
    """
    measure = cfg.build_measure()
    box = cfg.site_box(measure)
    R = max(support_radius(measure), 1e-9)
    tasks = [
        (lambda n=int(n), s=_trial_seed(cfg, t): _site_point(measure, cfg, n, s, box, R))
        for n in cfg.values for t in range(cfg.trials)
    ]
    logger.info(f"[Sweep] {cfg.name}: 非均匀试验 {len(tasks)} 次，生成器 {cfg.sites_spec.get('generator')}")
    rows, error = run_tasks(tasks, cfg.jobs)
    report = SweepReport(cfg.name, cfg.command, "N", rows, slope_window=cfg.slope_window,
                         extra={"sites": cfg.sites_spec, "domain_radius": R})
    return finish_report(report, error, flush)


# ==========================================
# 尾部截断
# ==========================================

def run_tail_experiment(cfg: SweepConfig, flush: Flush = None) -> SweepReport:
    """
    先投影到 B_R 再量化：W_p(μ, μ̂) ≤ 量化界 + 截断误差

    支撑已在 B_R 内时与 h 扫描完全相同；否则 μ 先离散成求积代理，投影与截断误差都在该代理上精确计算。
    断言 diam(V_0)·h 形式的界，rad(V_0)·h 形式只做记录。带站点生成器时走非均匀版本，界为 2·h_X + 截断误差。

    Args:
        cfg: 配置；tail = {"R", "epsilon", "q", "parameter": "h"|"N", "r_max"}
        flush: 失败时写出部分报告的回调

    Returns:
        SweepReport: 扫描结果，extra 中含衰减条件报告
    """
    measure = cfg.build_measure()
    d = measure.dim
    R = float(cfg.tail["R"])
    epsilon = float(cfg.tail.get("epsilon", 0.1))
    q = float(cfg.tail.get("q", 2.0))
    lattice = cfg.build_lattice(d)
    geometry = lattice.geometry

    compact = support_radius(measure) <= R
    if compact:
        source, projected, trunc = measure, measure, 0.0
    else:
        source = discretize(measure)
        projected = project_to_ball(source, R)
        trunc = truncation_error(source, R, cfg.p)

    probe, atoms = decay_inputs(measure, R)
    decay = check_decay_conditions(probe, None, atoms, TailDecaySpec(epsilon, cfg.p, R, q, d),
                                   cfg.tail.get("r_max"))
    extra = {
        "R": R,
        "compact": compact,
        "truncation_error": trunc,
        "truncation_error_density": truncation_error(measure, R, cfg.p),
        "decay": decay.to_dict(),
        "lattice": lattice.to_dict(),
    }

    def lattice_point(value: float) -> SweepRow:
        h = choose_h_for_budget(lattice, R, int(value)) if cfg.parameter == "N" else value
        if compact:
            row, _ = evaluate_point(measure, lattice_builder(measure, lattice, h, cfg.mode), cfg.p,
                                    value, cfg.seed, geometry.diameter * h)
        else:
            approximant = quantize_lattice(projected, lattice, h, cfg.mode)
            target, coupling = coupled_target(projected, approximant, cfg.p)
            measured, method = exact_distance(source, target, cfg.p)
            composite = coupling + trunc
            theoretical = geometry.diameter * h + trunc
            row = SweepRow(float(value), measured, composite, theoretical, term_count(approximant),
                           cfg.seed, method, bound_checks(measured, composite, theoretical),
                           {"n_cells": approximant.n_cells, "projected_coupling": coupling})
        row.extra["h"] = h
        row.extra["rad_bound"] = geometry.covering_radius * h + trunc
        return row

    def site_point(value: float, seed: int) -> SweepRow:
        box = (-R * np.ones(d), R * np.ones(d))
        if compact:
            return _site_point(measure, cfg, int(value), seed, box, R)
        sites, used_seed = generate_sites(cfg.sites_spec, int(value), box, seed)
        h_x = mesh_norm(sites, (np.zeros(d), R))
        approximant = quantize_nonuniform(projected, sites, cfg.mode)
        target, coupling = coupled_target(projected, approximant, cfg.p)
        measured, method = exact_distance(source, target, cfg.p)
        composite = coupling + trunc
        theoretical = 2.0 * h_x + trunc
        return SweepRow(float(value), measured, composite, theoretical, term_count(approximant), used_seed,
                        method, bound_checks(measured, composite, theoretical),
                        {"mesh_norm": h_x, "projected_coupling": coupling,
                         "C": h_x * int(value) ** (1.0 / d)})

    if cfg.sites_spec is not None:
        if cfg.parameter != "N":
            raise InvalidInputError("非均匀尾部实验的参数必须是 N")
        tasks = [(lambda v=v, s=_trial_seed(cfg, t): site_point(v, s))
                 for v in cfg.values for t in range(cfg.trials)]
    else:
        tasks = [(lambda v=v: lattice_point(v)) for v in cfg.values]
    logger.info(f"[Sweep] {cfg.name}: 尾部实验 R={R}，截断误差 {trunc:.6g}，{len(tasks)} 点")
    rows, error = run_tasks(tasks, cfg.jobs)
    report = SweepReport(cfg.name, cfg.command, cfg.parameter, rows, slope_window=cfg.slope_window, extra=extra)
    report.notes.append("asserted bound uses diam(V_0); the rad(V_0) form is recorded as extra.rad_bound")
    if not decay.implication_guaranteed:
        report.notes.append("decay conditions do not imply the epsilon bound for this R (see extra.decay.notes)")
    return finish_report(report, error, flush)


def run_tail_check(measure: Measure, R: float, p: float, epsilon: float, q: float = 2.0,
                   name: str = "tail-check") -> SweepReport:
    """
    只检查衰减条件（不量化）：报告截断误差与三个条件，失败的条件记为 extra_failures

    Returns:
        SweepReport: 无扫描行的报告
    """
    probe, atoms = decay_inputs(measure, R)
    decay = check_decay_conditions(probe, None, atoms, TailDecaySpec(epsilon, p, R, q, measure.dim))
    trunc = truncation_error(measure, R, p)
    report = SweepReport(name, "tail", "h", extra={"R": R, "p": p, "epsilon": epsilon, "q": q,
                                                   "truncation_error": trunc, "decay": decay.to_dict()})
    for index, ok in enumerate(decay.conditions_pass, start=1):
        if not ok:
            report.extra_failures.append(f"decay condition ({index}) fails")
    report.notes.extend(decay.notes)
    logger.info(f"[Sweep] {name}: R={R}，截断误差 {trunc:.6g}（ε = {epsilon}），条件 {decay.conditions_pass}")
    return report


# ==========================================
# 单次量化
# ==========================================

def run_quantize(cfg: SweepConfig) -> Tuple[Approximant, SweepReport]:
    """
    单次量化（values[0] 为 h，或带站点生成器时为 N），附带径向矩不等式检查

    Returns:
        (approximant, report)
    """
    measure = cfg.build_measure()
    value = cfg.values[0]
    if cfg.sites_spec is not None:
        if "sites" in cfg.sites_spec:
            sites, seed = np.asarray(cfg.sites_spec["sites"], dtype=float), cfg.seed
        else:
            sites, seed = generate_sites(cfg.sites_spec, int(value), cfg.site_box(measure), cfg.seed)
        R = max(support_radius(measure), 1e-9)
        h_x = mesh_norm(sites, (np.zeros(measure.dim), R))
        row, approximant = evaluate_point(measure, sites_builder(measure, sites, cfg.mode), cfg.p,
                                          sites.shape[0], seed, 2.0 * h_x)
        row.extra["mesh_norm"] = h_x
    else:
        lattice = cfg.build_lattice(measure.dim)
        row, approximant = evaluate_point(measure, lattice_builder(measure, lattice, value, cfg.mode), cfg.p,
                                          value, cfg.seed, lattice.geometry.diameter * value)
    moments = moment_bound_suite(measure, approximant.scheme, cfg.p)
    for m in moments:
        row.checks[m.inequality_id] = m.passed
    report = SweepReport(cfg.name, cfg.command, cfg.parameter, [row],
                         extra={"moment_bounds": [m.to_dict() for m in moments]})
    report.fit()
    return approximant, report
