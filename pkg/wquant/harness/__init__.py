#!/usr/bin/env python3
"""
实验层 - 配置 → 扫描 → 报告

把 core 的量化与精确运输组合成可复现的实验（h 扫描、N 项扫描、
非均匀站点、尾部截断、基线比较）以及验收套件
"""

# 配置
from .specs import (
    COMMANDS,
    SweepConfig,
    load_config,
    build_measure,
    generate_sites,
    jittered_grid,
    random_uniform,
    random_atoms,
)

# 报告
from .report import (
    SlopeFit,
    SweepRow,
    SweepReport,
    RunJournal,
    fit_slope,
    csv_text,
    write_reports,
)

# 实验
from .sweeps import (
    exact_distance,
    evaluate_point,
    run_h_sweep,
    run_nterm_sweep,
    run_nonuniform_trial,
    run_tail_experiment,
    run_tail_check,
    run_quantize,
)
from .baselines import run_baselines, empirical_distances, lloyd_codebook
from .acceptance import CriterionResult, run_acceptance

__all__ = [
    # 配置
    'COMMANDS',
    'SweepConfig',
    'load_config',
    'build_measure',
    'generate_sites',
    'jittered_grid',
    'random_uniform',
    'random_atoms',

    # 报告
    'SlopeFit',
    'SweepRow',
    'SweepReport',
    'RunJournal',
    'fit_slope',
    'csv_text',
    'write_reports',

    # 实验
    'exact_distance',
    'evaluate_point',
    'run_h_sweep',
    'run_nterm_sweep',
    'run_nonuniform_trial',
    'run_tail_experiment',
    'run_tail_check',
    'run_quantize',
    'run_baselines',
    'empirical_distances',
    'lloyd_codebook',
    'CriterionResult',
    'run_acceptance',
]
