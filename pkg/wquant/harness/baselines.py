#!/usr/bin/env python3
"""
基线比较 - 经验测度与 Lloyd（k-means）量化器

与同一 N 下的格量化器并列记录，只做比较，不断言任何界
"""
import logging
import math
from typing import Dict, Optional

import numpy as np
from sklearn.cluster import KMeans

from .. import config
from ..core.measures import DiscreteMeasure, Measure, discretize, sample
from ..core.quantize import coupling_cost, dirac_realization, quantize_nonuniform
from .report import SweepReport
from .specs import SweepConfig
from .sweeps import Flush, finish_report, lattice_builder, evaluate_point, exact_distance, run_tasks

logger = logging.getLogger(__name__)


def empirical_distances(measure: Measure, reference: DiscreteMeasure, n: int, p: float, seed: int,
                        n_seeds: int = config.BASELINE_SEEDS) -> Dict[str, Optional[float]]:
    """
    经验测度 (1/N)Σδ_{x_i} 到参考测度的 W_p，在 n_seeds 个种子上取平均

    Returns:
        {"mean", "std", "n_exact"}：任何一个种子超出 LP 规模时 mean 为 None
    """
    values = []
    for s in range(n_seeds):
        points = sample(measure, n, seed=seed * 1000 + s)
        value, _ = exact_distance(reference, DiscreteMeasure(points), p)
        if value is None:
            return {"mean": None, "std": None, "n_exact": len(values)}
        values.append(value)
    return {"mean": math.fsum(values) / len(values), "std": float(np.std(values)), "n_exact": len(values)}


def lloyd_codebook(measure: Measure, n: int, seed: int,
                   n_samples: int = config.LLOYD_SAMPLES) -> np.ndarray:
    """
    Lloyd 迭代（k-means，单次初始化，50 次迭代）得到的码本

    Args:
        measure: 测度
        n: 码本大小
        seed: 采样与初始化种子
        n_samples: 训练样本数

    Returns:
        np.ndarray: (k, d) 两两不同的码字，k ≤ n
    """
    points = sample(measure, n_samples, seed)
    k = min(n, np.unique(points, axis=0).shape[0])
    kmeans = KMeans(n_clusters=k, n_init=1, max_iter=config.LLOYD_ITERATIONS, random_state=seed).fit(points)
    centers = np.unique(kmeans.cluster_centers_, axis=0)
    if centers.shape[0] < n:
        logger.info(f"[Baseline] Lloyd 码本只有 {centers.shape[0]} 个不同码字（N = {n}）")
    return centers


def lloyd_distance(measure: Measure, reference: DiscreteMeasure, n: int, p: float, seed: int) -> Dict:
    """Lloyd 码本 + 精确胞元质量重分配后的 W_p 与显式耦合代价"""
    centers = lloyd_codebook(measure, n, seed)
    approximant = quantize_nonuniform(measure, centers)
    value, method = exact_distance(reference, dirac_realization(approximant), p)
    return {"distance": value, "coupling": coupling_cost(measure, approximant, p),
            "codewords": int(centers.shape[0]), "method": method}


def run_baselines(cfg: SweepConfig, flush: Flush = None) -> SweepReport:
    """
    同一 N 下比较格量化器、经验测度与 Lloyd 量化器

    格量化器取 h = N^{−1/d}（上限 1）；三者都对同一个离散参考测度计算 W_p，
    格量化器的行仍检查 实测 ≤ 耦合 ≤ diam(V_0)·h

    Args:
        cfg: 配置（values 为 N）
        flush: 失败时写出部分报告的回调

    Returns:
        SweepReport: 每个 N 一行，extra 中含 empirical_mean / lloyd 等
    """
    measure = cfg.build_measure()
    d = measure.dim
    lattice = cfg.build_lattice(d)
    reference = discretize(measure)

    def point(n: int):
        h = min(1.0, n ** (-1.0 / d))
        row, approximant = evaluate_point(measure, lattice_builder(measure, lattice, h, cfg.mode), cfg.p,
                                          n, cfg.seed, lattice.geometry.diameter * h, discretization=False)
        lattice_ref, _ = exact_distance(reference, dirac_realization(approximant), cfg.p)
        empirical = empirical_distances(measure, reference, n, cfg.p, cfg.seed)
        lloyd = lloyd_distance(measure, reference, n, cfg.p, cfg.seed)
        row.extra.update({
            "h": h,
            "lattice_reference": lattice_ref,
            "empirical_mean": empirical["mean"],
            "empirical_std": empirical["std"],
            "lloyd": lloyd["distance"],
            "lloyd_coupling": lloyd["coupling"],
            "lloyd_codewords": lloyd["codewords"],
        })
        logger.info(f"[Baseline] N={n}: lattice={lattice_ref}, empirical={empirical['mean']}, "
                    f"lloyd={lloyd['distance']}")
        return row

    tasks = [(lambda n=int(n): point(n)) for n in cfg.values]
    rows, error = run_tasks(tasks, cfg.jobs)
    report = SweepReport(cfg.name, cfg.command, "N", rows, slope_window=cfg.slope_window,
                         extra={"reference_atoms": reference.n_atoms, "seeds": config.BASELINE_SEEDS,
                                "lloyd_samples": config.LLOYD_SAMPLES})
    report.notes.append("baselines are informational: no bound is asserted on empirical or Lloyd distances")
    return finish_report(report, error, flush)
