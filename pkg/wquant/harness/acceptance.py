#!/usr/bin/env python3
"""
验收套件 - wquant verify

十组检查：1D 闭式解、量化不等式、N 项扫描、非均匀站点、径向矩不等式、
覆盖数缩放、OT 求解器、尾部截断、投影后量化、并行确定性。
quick=True 时每组使用缩小的规模（测试套件使用）
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List

import numpy as np
from scipy.special import zeta

from .. import config
from ..core.lattice import Lattice, covering_count
from ..core.measures import Atom, DiscreteMeasure
from ..core.models import ApproximantMode, TailDecaySpec
from ..core.ot_exact import metric_check, wasserstein_1d, wasserstein_bruteforce, wasserstein_lp
from ..core.quantize import LatticeScheme, SiteScheme, moment_bound_suite, quantize_lattice
from ..core.tail import check_decay_conditions, project_to_ball, truncation_error
from ..core.utils import rng_for_chunk
from ..data.presets import GAUSSIAN_2D, UNIFORM_1D
from .report import SweepReport, SweepRow, csv_text
from .specs import SweepConfig, build_measure
from .sweeps import evaluate_point, lattice_builder, run_h_sweep, run_nonuniform_trial, run_nterm_sweep, \
    run_tail_experiment

logger = logging.getLogger(__name__)


@dataclass
class CriterionResult:
    """单组验收检查的结果"""
    number: int
    title: str
    passed: bool
    details: Dict[str, Any] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)
    rows: List[SweepRow] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "details": self.details, "failures": list(self.failures), "n_rows": len(self.rows)}


def _sweep_config(command: str, measure: Dict, values, jobs: int, **kwargs) -> SweepConfig:
    return SweepConfig(command=command, measure_spec=measure, values=list(values), jobs=jobs,
                       name=kwargs.pop("name", command), **kwargs)


def _collect(number: int, title: str, reports: List[SweepReport], failures: List[str],
             details: Dict = None) -> CriterionResult:
    for report in reports:
        failures.extend(f"{report.name}: {f}" for f in report.failures)
    rows = [row for report in reports for row in report.rows]
    return CriterionResult(number, title, not failures, details or {}, failures, rows)


# ==========================================
# 1. 1D 闭式解
# ==========================================

def closed_form_1d(quick: bool, jobs: int) -> CriterionResult:
    """[−½,½] 上均匀分布、Z¹：W_p(μ, μ_h) = h/(2(p+1)^{1/p})，LP / 分位数 / 耦合 三者一致"""
    depth = 4 if quick else 8
    lattice = Lattice.integer(1)
    failures, reports = [], []
    for p in (1, 2, 3):
        cfg = _sweep_config("sweep-h", UNIFORM_1D, [2.0 ** -k for k in range(1, depth + 1)], jobs,
                            name=f"closed_form_p{p}", p=float(p), slope_window=(0.999, 1.001))
        report = run_h_sweep(cfg)
        measure = cfg.build_measure()
        for row in report.rows:
            h = row.parameter
            expected = h / (2.0 * (p + 1.0) ** (1.0 / p))
            approximant = quantize_lattice(measure, lattice, h)
            source = approximant.surrogate.as_measure()
            target = DiscreteMeasure(approximant.sites, approximant.masses)
            lp_value, _ = wasserstein_lp(source, target, p)
            quantile = wasserstein_1d(source, target, p)
            for label, value in (("measured", row.measured_wp), ("coupling", row.coupling_bound),
                                 ("lp", lp_value), ("quantile", quantile)):
                if value is None or abs(value - expected) > 1e-9:
                    failures.append(f"p={p}, h={h!r}: {label} = {value!r}, expected {expected!r}")
        reports.append(report)
    return _collect(1, "1D closed-form quantization", reports, failures)


# ==========================================
# 2. 量化不等式
# ==========================================

_LATTICES = [{"kind": "Zd", "dim": 1}, {"kind": "Zd", "dim": 2}, {"kind": "Zd", "dim": 3}, {"kind": "A2", "dim": 2}]


def _random_measure_spec(rng: np.random.Generator, dim: int, index: int) -> Dict:
    choices = ["uniform_cube", "gaussian", "random_atoms"] + (["circle_arc"] if dim == 2 else [])
    kind = choices[int(rng.integers(len(choices)))]
    if kind == "uniform_cube":
        return {"type": kind, "dim": dim, "center": rng.uniform(-0.2, 0.2, dim).tolist(), "side": 1.0}
    if kind == "gaussian":
        return {"type": kind, "dim": dim, "sigma": 0.1, "truncation": 8.0}
    if kind == "random_atoms":
        return {"type": kind, "dim": dim, "n_atoms": 50, "seed": index}
    return {"type": kind, "radius": float(rng.uniform(0.2, 0.5)), "n_atoms": 256}


def quantization_inequality(quick: bool, jobs: int, seed: int = 0) -> CriterionResult:
    """随机配置上 实测 W_p ≤ 耦合代价 ≤ diam(V_0)·h"""
    n_configs = 8 if quick else 30
    rng = rng_for_chunk(seed, 2)
    failures, rows = [], []
    for i in range(n_configs):
        lattice = Lattice.from_dict(_LATTICES[int(rng.integers(len(_LATTICES)))])
        spec = _random_measure_spec(rng, lattice.dim, i)
        h = float([0.5, 0.25, 0.125][int(rng.integers(3))])
        p = float(rng.integers(1, 3))
        mode = ApproximantMode.DIRAC if rng.uniform() < 0.5 else ApproximantMode.INDICATOR
        measure = build_measure(spec)
        row, _ = evaluate_point(measure, lattice_builder(measure, lattice, h, mode), p, h, i,
                                lattice.geometry.diameter * h, discretization=False)
        row.extra.update({"measure": spec["type"], "lattice": lattice.to_dict(), "p": p, "mode": mode.value})
        if not row.passed:
            failures.append(f"config {i} ({spec['type']}, {lattice!r}, h={h}, p={p}, {mode.value}): {row.checks}")
        rows.append(row)
    return CriterionResult(2, "quantization inequality suite", not failures, {"configs": n_configs}, failures, rows)


# ==========================================
# 3. N 项扫描
# ==========================================

def nterm_sweeps(quick: bool, jobs: int) -> CriterionResult:
    """均匀立方体 d = 1, 2, 3：W_p ≤ √d·N^{−1/d}，斜率在 [−1.1/d, −0.9/d]"""
    reports = []
    for d in (1, 2, 3):
        top = 3 if quick else (4 if d == 3 else 5)
        values = [(2 ** k) ** d for k in range(1, top + 1)]
        cfg = _sweep_config("sweep-n", {"type": "uniform_cube", "dim": d, "side": 1.0}, values, jobs,
                            name=f"nterm_d{d}", slope_window=(-1.1 / d, -0.9 / d))
        reports.append(run_nterm_sweep(cfg))
    details = {r.name: r.slope.slope if r.slope else None for r in reports}
    return _collect(3, "N-term sweep", reports, [], details)


# ==========================================
# 4. 非均匀站点
# ==========================================

def nonuniform_sites(quick: bool, jobs: int) -> CriterionResult:
    """扰动网格与随机站点，d = 2：每次试验 W_p ≤ 2·h_X"""
    values = [64] if quick else [64, 256]
    trials = 2 if quick else 10
    reports = []
    for generator in ({"generator": "jittered_grid", "jitter": 0.25}, {"generator": "random_uniform"}):
        cfg = _sweep_config("nonuniform", {"type": "uniform_cube", "dim": 2, "side": 1.0}, values, jobs,
                            name=f"nonuniform_{generator['generator']}", sites_spec=generator, trials=trials)
        reports.append(run_nonuniform_trial(cfg))
    return _collect(4, "nonuniform sites", reports, [])


# ==========================================
# 5. 径向矩不等式
# ==========================================

def moment_inequalities(quick: bool, jobs: int, seed: int = 0) -> CriterionResult:
    """格方案与站点方案的径向矩不等式：每份报告 lhs ≤ rhs + 1e-9"""
    n_configs = 10 if quick else 50
    rng = rng_for_chunk(seed, 5)
    failures, count = [], 0
    for i in range(n_configs):
        lattice = Lattice.from_dict(_LATTICES[int(rng.integers(len(_LATTICES)))])
        spec = _random_measure_spec(rng, lattice.dim, i)
        h = float([1.0, 0.5, 0.25][int(rng.integers(3))])
        p = float(rng.integers(1, 4))
        for report in moment_bound_suite(build_measure(spec), LatticeScheme(lattice, h), p):
            count += 1
            if not report.passed:
                failures.append(f"lattice config {i}: {report.inequality_id} {report.lhs!r} > {report.rhs!r}")
    for i in range(n_configs):
        dim = int(rng.integers(1, 3))
        spec = _random_measure_spec(rng, dim, 1000 + i)
        sites = rng.uniform(-0.6, 0.6, size=(int(rng.integers(4, 33)), dim))
        p = float(rng.integers(1, 4))
        for report in moment_bound_suite(build_measure(spec), SiteScheme(sites), p):
            count += 1
            if not report.passed:
                failures.append(f"site config {i}: {report.inequality_id} {report.lhs!r} > {report.rhs!r}")
    return CriterionResult(5, "radial moment inequalities", not failures, {"reports": count}, failures)


# ==========================================
# 6. 覆盖数缩放
# ==========================================

def covering_scaling(quick: bool, jobs: int) -> CriterionResult:
    """covering_count(h) ≤ 3^d·h^{−d}·covering_count(1)"""
    failures, counts = [], {}
    for lattice in (Lattice.integer(2), Lattice.hexagonal()):
        d = lattice.dim
        for R in (1.0, 2.0):
            base = covering_count(lattice, 1.0, R)
            for h in (0.5, 0.25):
                count = covering_count(lattice, h, R)
                counts[f"{lattice.to_dict()['kind']}/R={R}/h={h}"] = count
                if count > 3 ** d * h ** (-d) * base:
                    failures.append(f"{lattice!r}, R={R}, h={h}: {count} > 3^d h^-d {base}")
    return CriterionResult(6, "covering count scaling", not failures, {"counts": counts}, failures)


# ==========================================
# 7. OT 求解器
# ==========================================

def ot_solvers(quick: bool, jobs: int, seed: int = 0) -> CriterionResult:
    """网络单纯形 vs 置换穷举（1e-12）、vs 一维分位数解法（1e-9），以及度量公理"""
    rng = rng_for_chunk(seed, 7)
    n_small = 20 if quick else 100
    failures = []
    for i in range(n_small):
        n = int(rng.integers(1, 6))
        mu = DiscreteMeasure(rng.uniform(-1, 1, size=(n, 2)))
        nu = DiscreteMeasure(rng.uniform(-1, 1, size=(n, 2)))
        p = float(rng.integers(1, 3))
        lp_value, _ = wasserstein_lp(mu, nu, p)
        brute = wasserstein_bruteforce(mu, nu, p)
        if abs(lp_value - brute) > 1e-12:
            failures.append(f"small instance {i}: lp {lp_value!r} vs brute force {brute!r}")
    for i in range(n_small):
        n_mu, n_nu = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        mu = DiscreteMeasure(rng.uniform(-1, 1, size=(n_mu, 1)), rng.uniform(0.1, 1.0, size=n_mu))
        nu = DiscreteMeasure(rng.uniform(-1, 1, size=(n_nu, 1)))
        p = float(rng.integers(1, 4))
        lp_value, _ = wasserstein_lp(mu, nu, p)
        quantile = wasserstein_1d(mu, nu, p)
        if abs(lp_value - quantile) > 1e-9:
            failures.append(f"1D instance {i}: lp {lp_value!r} vs quantile {quantile!r}")
    n_triples = 4 if quick else 20
    for i in range(n_triples):
        triple = [DiscreteMeasure(rng.uniform(-1, 1, size=(4, 2)), rng.uniform(0.1, 1.0, size=4)) for _ in range(3)]
        report = metric_check(triple, 2.0, seed=i)
        if not report.passed:
            failures.extend(f"triple {i}: {f}" for f in report.failures)
    return CriterionResult(7, "OT solver correctness", not failures,
                           {"small_instances": n_small, "triples": n_triples}, failures)


# ==========================================
# 8. 尾部截断
# ==========================================

def tail_module(quick: bool, jobs: int) -> CriterionResult:
    """单原子 / 双原子尾部的精确投影误差、饱和阈值的原子尾部、截断误差关于 R 单调"""
    failures = []
    single = DiscreteMeasure.dirac([3.0, 0.0])
    for p in (1.0, 2.0):
        err = truncation_error(single, 1.0, p)
        moved = wasserstein_lp(single, project_to_ball(single, 1.0), p)[0]
        if abs(err - 2.0) > 1e-12 or abs(moved - 2.0) > 1e-9:
            failures.append(f"single atom p={p}: error {err!r}, W_p to projection {moved!r}")

    pair = DiscreteMeasure([[3.0, 0.0], [0.0, 0.5]], [0.5, 0.5])
    err = truncation_error(pair, 1.0, 2.0)
    if abs(err - math.sqrt(2.0)) > 1e-12:
        failures.append(f"two atoms: error {err!r}, expected sqrt(2)")

    epsilon, p, q, R = 0.5, 2.0, 2.0, 1.0
    spec = TailDecaySpec(epsilon, p, R, q, dim=2)
    z = float(zeta(q))
    atoms = []
    for k in range(1, 6):
        excess = float(k)
        weight = epsilon ** p / (3.0 * z) * k ** (-q) * excess ** (-p)
        atoms.append(Atom((R + excess, 0.0), weight))
    atoms.append(Atom((0.0, 0.0), 1.0 - math.fsum(a.weight for a in atoms)))
    report = check_decay_conditions(None, None, atoms, spec)
    if not report.conditions_pass[2] or report.total_bound > epsilon + 1e-9:
        failures.append(f"saturated atoms: conditions {report.conditions_pass}, total {report.total_bound!r}")

    gaussian = build_measure(GAUSSIAN_2D)
    radii = np.linspace(0.1, 1.5, 10)
    errors = [truncation_error(gaussian, float(r), 2.0) for r in radii]
    if any(b > a + 1e-12 for a, b in zip(errors, errors[1:])):
        failures.append(f"truncation error not monotone in R: {errors}")
    return CriterionResult(8, "tail module", not failures,
                           {"saturated_total_bound": report.total_bound, "monotone_errors": errors}, failures)


# ==========================================
# 9. 投影后量化
# ==========================================

def tail_composition(quick: bool, jobs: int) -> CriterionResult:
    """截断高斯 d = 2：W_p(μ, μ̂_h) ≤ diam(V_0)·h + 截断误差"""
    cfg = _sweep_config("tail", GAUSSIAN_2D, [0.5, 0.25, 0.125], jobs, name="gaussian_tail",
                        lattice_spec={"kind": "Zd", "dim": 2},
                        tail={"R": 0.5, "epsilon": 0.1, "q": 2.0, "parameter": "h"})
    report = run_tail_experiment(cfg)
    return _collect(9, "projection then quantization", [report], [],
                    {"truncation_error": report.extra["truncation_error"]})


# ==========================================
# 10. 并行确定性
# ==========================================

def determinism(quick: bool, jobs: int) -> CriterionResult:
    """同一扫描在 --jobs 1 与 --jobs 8 下的 report.csv 逐字节一致"""
    texts = []
    for n_jobs in (1, 8):
        cfg = _sweep_config("sweep-h", {"type": "uniform_cube", "dim": 2, "side": 1.0},
                            [0.5, 0.25, 0.125], n_jobs, name="determinism", mode="indicator")
        texts.append(csv_text(run_h_sweep(cfg).rows))
    failures = [] if texts[0] == texts[1] else ["report.csv differs between --jobs 1 and --jobs 8"]
    return CriterionResult(10, "determinism across thread counts", not failures, {}, failures)


# ==========================================
# 汇总
# ==========================================

CRITERIA: List[Callable[[bool, int], CriterionResult]] = [
    closed_form_1d,
    quantization_inequality,
    nterm_sweeps,
    nonuniform_sites,
    moment_inequalities,
    covering_scaling,
    ot_solvers,
    tail_module,
    tail_composition,
    determinism,
]


def run_acceptance(quick: bool = False, jobs: int = config.DEFAULT_JOBS) -> SweepReport:
    """
    运行全部验收检查

    Args:
        quick: 缩小规模
        jobs: 扫描并行度

    Returns:
        SweepReport: rows 为各组扫描行的拼接（report.csv 的内容），extra.criteria 为每组结果
    """
    results = []
    for criterion in CRITERIA:
        result = criterion(quick, jobs)
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(level, f"[Verify] {result.number}. {result.title}: {'PASS' if result.passed else 'FAIL'}")
        for failure in result.failures[:10]:
            logger.error(f"[Verify]    {failure}")
        results.append(result)
    rows = [row for result in results for row in result.rows]
    report = SweepReport("verify-quick" if quick else "verify", "verify", "parameter", rows,
                         extra={"criteria": [r.to_dict() for r in results], "quick": quick})
    for result in results:
        report.notes.append(f"criterion {result.number} ({result.title}): {'PASS' if result.passed else 'FAIL'}")
        report.extra_failures.extend(f"criterion {result.number}: {f}" for f in result.failures)
    return report
