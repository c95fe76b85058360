#!/usr/bin/env python3
"""
精确最优运输 - 离散测度之间的 W_p

- wasserstein_1d: 一维分位数匹配（单调重排）
- wasserstein_lp: 网络单纯形（POT ot.emd）+ 互补松弛 / 对偶间隙证书
- wasserstein_bruteforce: 测试用穷举
- metric_check: 对称性、同一性、三角不等式
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
import ot

from .. import config
from ..errors import InvalidInputError, ResourceLimitError, SolverFailureError
from .measures import DiscreteMeasure
from .models import TransportPlan
from .utils import rng_for_chunk, stable_sum

logger = logging.getLogger(__name__)


def _check_pair(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float):
    if not (isinstance(mu, DiscreteMeasure) and isinstance(nu, DiscreteMeasure)):
        raise InvalidInputError("精确 OT 只接受离散测度")
    if mu.dim != nu.dim:
        raise InvalidInputError(f"维数不一致: {mu.dim} vs {nu.dim}")
    if not p >= 1:
        raise InvalidInputError(f"p 必须 ≥ 1，当前 {p}")


def wasserstein_1d(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float) -> float:
    """
    一维 W_p：∫_0^1 |F^{-1}(t) − G^{-1}(t)|^p dt 在两组累积权重的并集断点上精确求和

    Args:
        mu: d = 1 的离散测度
        nu: d = 1 的离散测度
        p: 指数（≥ 1）

    Returns:
        float: W_p(μ, ν)
    """
    _check_pair(mu, nu, p)
    if mu.dim != 1:
        raise InvalidInputError("wasserstein_1d 只支持 d = 1")
    # DiscreteMeasure 的原子已按位置排序
    x, a = mu.locations[:, 0], mu.weights
    y, b = nu.locations[:, 0], nu.weights
    cum_a, cum_b = np.cumsum(a), np.cumsum(b)
    cum_a[-1] = cum_b[-1] = 1.0
    breaks = np.union1d(cum_a, cum_b)
    deltas = np.diff(np.concatenate([[0.0], breaks]))
    mids = breaks - 0.5 * deltas
    ia = np.minimum(np.searchsorted(cum_a, mids, side="right"), x.shape[0] - 1)
    ib = np.minimum(np.searchsorted(cum_b, mids, side="right"), y.shape[0] - 1)
    cost = stable_sum(deltas * np.abs(x[ia] - y[ib]) ** p)
    return max(cost, 0.0) ** (1.0 / p)


def wasserstein_lp(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float) -> Tuple[float, TransportPlan]:
    """
    网络单纯形求解离散运输线性规划，并用对偶解认证最优性

    认证：边缘约束误差 ≤ 1e-10；u_i + v_j ≤ M_ij + 1e-9·(1 + max M)；
    |primal − dual| ≤ 1e-9·(1 + primal)

    Args:
        mu: 源测度
        nu: 目标测度
        p: 代价指数

    Returns:
        (W_p, plan): 距离与最优运输方案
    """
    _check_pair(mu, nu, p)
    pairs = mu.n_atoms * nu.n_atoms
    if pairs > config.LP_MAX_PAIRS:
        raise ResourceLimitError(f"LP 规模 {mu.n_atoms}×{nu.n_atoms} 超过上限 {config.LP_MAX_PAIRS}")
    a = np.ascontiguousarray(mu.weights, dtype=np.float64)
    b = np.ascontiguousarray(nu.weights, dtype=np.float64)
    cost = np.ascontiguousarray(ot.dist(mu.locations, nu.locations, metric="euclidean") ** p, dtype=np.float64)
    plan, log = ot.emd(a, b, cost, numItermax=config.EMD_MAX_ITER, log=True)

    primal = stable_sum(plan * cost)
    u, v = np.asarray(log["u"]), np.asarray(log["v"])
    dual = stable_sum(a * u) + stable_sum(b * v)
    scale = 1.0 + float(cost.max())
    residuals = {
        "row_marginal": float(np.max(np.abs(plan.sum(axis=1) - a))),
        "col_marginal": float(np.max(np.abs(plan.sum(axis=0) - b))),
        "dual_infeasibility": float(max(0.0, np.max(u[:, None] + v[None, :] - cost))),
        "duality_gap": abs(primal - dual),
        "negative_mass": float(max(0.0, -plan.min())),
    }
    failed = (
        log.get("warning") is not None
        or residuals["row_marginal"] > config.MARGINAL_TOLERANCE
        or residuals["col_marginal"] > config.MARGINAL_TOLERANCE
        or residuals["dual_infeasibility"] > config.DUALITY_TOLERANCE * scale
        or residuals["duality_gap"] > config.DUALITY_TOLERANCE * (1.0 + primal)
        or residuals["negative_mass"] > 0
    )
    if failed:
        logger.error(f"[OT] 网络单纯形未通过认证: {residuals}, warning={log.get('warning')}")
        raise SolverFailureError("网络单纯形未能给出可认证的最优解", residuals)

    rows, cols = np.nonzero(plan > 0)
    transport = TransportPlan(rows, cols, plan[rows, cols], float(p), primal)
    return max(primal, 0.0) ** (1.0 / p), transport


def wasserstein(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float) -> float:
    """精确 W_p：d = 1 用分位数解法，否则用网络单纯形"""
    if mu.dim == 1 and nu.dim == 1:
        return wasserstein_1d(mu, nu, p)
    value, _ = wasserstein_lp(mu, nu, p)
    return value


# ==========================================
# 穷举
# ==========================================

def _tree_flow(edges: Sequence[Tuple[int, int]], a: np.ndarray, b: np.ndarray):
    """生成树上的唯一流（叶子消去）；有环或负流时返回 None"""
    supply = {("r", i): float(w) for i, w in enumerate(a)}
    supply.update({("c", j): float(w) for j, w in enumerate(b)})
    remaining = {e: None for e in edges}
    flows = {}
    while remaining:
        degree: Dict[Tuple[str, int], List[Tuple[int, int]]] = {}
        for i, j in remaining:
            degree.setdefault(("r", i), []).append((i, j))
            degree.setdefault(("c", j), []).append((i, j))
        leaf = next((node for node, es in degree.items() if len(es) == 1), None)
        if leaf is None:
            return None
        edge = degree[leaf][0]
        amount = supply[leaf]
        if amount < -1e-15:
            return None
        flows[edge] = amount
        other = ("c", edge[1]) if leaf[0] == "r" else ("r", edge[0])
        supply[other] -= amount
        supply[leaf] = 0.0
        del remaining[edge]
    if any(abs(s) > 1e-12 for s in supply.values()):
        return None
    return flows


def wasserstein_bruteforce(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float) -> float:
    """
    穷举求精确 W_p（测试用）

    等权等原子数（n ≤ 7）时枚举全部置换；否则 n + m ≤ 10 时枚举运输多面体的全部顶点
    （n + m − 1 条边构成的生成树）

    Args:
        mu: 源测度
        nu: 目标测度
        p: 代价指数

    Returns:
        float: W_p(μ, ν)
    """
    _check_pair(mu, nu, p)
    n, m = mu.n_atoms, nu.n_atoms
    cost = np.linalg.norm(mu.locations[:, None, :] - nu.locations[None, :, :], axis=2) ** p
    uniform = (n == m and np.allclose(mu.weights, 1.0 / n, atol=1e-15, rtol=0)
               and np.allclose(nu.weights, 1.0 / m, atol=1e-15, rtol=0))
    if uniform and n <= config.BRUTE_FORCE_MAX_PERMUTATION:
        best = min(math.fsum(cost[i, perm[i]] for i in range(n)) for perm in itertools.permutations(range(n)))
        return (best / n) ** (1.0 / p)
    if n + m > config.BRUTE_FORCE_MAX_SUPPORT:
        raise ResourceLimitError(f"穷举规模 {n}+{m} 超过上限 {config.BRUTE_FORCE_MAX_SUPPORT}")
    cells = [(i, j) for i in range(n) for j in range(m)]
    best = math.inf
    for edges in itertools.combinations(cells, n + m - 1):
        flows = _tree_flow(edges, mu.weights, nu.weights)
        if flows is None:
            continue
        best = min(best, math.fsum(f * cost[e] for e, f in flows.items()))
    return max(best, 0.0) ** (1.0 / p)


# ==========================================
# 度量性质检查
# ==========================================

@dataclass
class MetricCheckReport:
    """度量公理检查结果，failures 列出每一处违反"""
    n_measures: int
    p: float
    distances: np.ndarray
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict:
        return {"n_measures": self.n_measures, "p": self.p, "passed": self.passed,
                "distances": self.distances.tolist(), "failures": list(self.failures)}


def _permuted_copy(measure: DiscreteMeasure, seed: int, index: int) -> DiscreteMeasure:
    order = rng_for_chunk(seed, index).permutation(measure.n_atoms)
    return DiscreteMeasure(measure.locations[order], measure.weights[order])


def metric_check(measures: Sequence[DiscreteMeasure], p: float, seed: int = 0) -> MetricCheckReport:
    """
    检查 W_p 的度量公理：对称性、同一性（距离 < 1e-9 当且仅当合并后原子一致）、
    三角不等式（容差 1e-8）；每个测度还与其原子重排副本比较（距离应为 0）

    Args:
        measures: 同维离散测度
        p: 指数
        seed: 原子重排的随机种子

    Returns:
        MetricCheckReport: 检查结果
    """
    if not measures:
        raise InvalidInputError("metric_check 至少需要一个测度")
    if len({m.dim for m in measures}) != 1:
        raise InvalidInputError("metric_check 的测度必须同维")
    k = len(measures)
    dist = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i != j:
                dist[i, j] = wasserstein(measures[i], measures[j], p)
    report = MetricCheckReport(k, float(p), dist)

    for i in range(k):
        twin = _permuted_copy(measures[i], seed, i)
        d_twin = wasserstein(measures[i], twin, p)
        if d_twin >= 1e-9:
            report.failures.append(f"identity: W(μ{i}, permuted μ{i}) = {d_twin:.3g}")
        for j in range(i + 1, k):
            if abs(dist[i, j] - dist[j, i]) > 1e-9 * (1.0 + dist[i, j]):
                report.failures.append(f"symmetry: W(μ{i}, μ{j}) = {dist[i, j]!r} ≠ W(μ{j}, μ{i}) = {dist[j, i]!r}")
            equal = measures[i].same_atoms(measures[j])
            if (dist[i, j] < 1e-9) != equal:
                report.failures.append(f"identity: W(μ{i}, μ{j}) = {dist[i, j]:.3g}, same atoms = {equal}")
    for i, j, l in itertools.permutations(range(k), 3):
        if dist[i, l] > dist[i, j] + dist[j, l] + 1e-8:
            report.failures.append(f"triangle: W(μ{i}, μ{l}) > W(μ{i}, μ{j}) + W(μ{j}, μ{l})")
    if report.failures:
        logger.warning(f"[OT] metric_check 发现 {len(report.failures)} 处违反")
    return report
