#!/usr/bin/env python3
"""
核心模块 - 测度 → 格 → 量化 → 截断 → 精确运输

提供 Voronoi 划分量化与 Wasserstein 误差认证的统一接口
"""

# 数据结构
from .models import (
    QuadratureMethod,
    QuadratureSpec,
    QuadratureResult,
    ShellMassSpec,
    VoronoiGeometry,
    ApproximantMode,
    TransportPlan,
    MomentBoundReport,
    TailDecaySpec,
    TruncationReport,
)

# 测度
from .measures import (
    Atom,
    DiscreteMeasure,
    DensityMeasure,
    Mixture,
    Measure,
    moment,
    moment_with_error,
    sample,
    pushforward,
    discretize,
    total_mass,
    support_box,
    support_radius,
    uniform_cube,
    truncated_gaussian,
    circle_arc,
)

# 格
from .lattice import (
    CellId,
    Lattice,
    LatticeKind,
    decode,
    decode_batch,
    voronoi_geometry,
    covering_count,
    cells_intersecting_box,
    cell_vertices,
    cell_volume,
)

# 量化
from .quantize import (
    LatticeScheme,
    SiteScheme,
    VoronoiScheme,
    Approximant,
    AlignedSurrogate,
    CellNodeSet,
    aligned_surrogate,
    quantize_lattice,
    quantize_nonuniform,
    nearest_sites,
    mesh_norm,
    separation_radius,
    coupling_cost,
    moment_bound_suite,
    choose_h_for_budget,
    term_count,
    nterm_hypothesis,
    dirac_realization,
    cell_node_set,
    realize,
)

# 截断
from .tail import project_to_ball, truncation_error, check_decay_conditions, decay_inputs, DensityEvaluator

# 精确运输
from .ot_exact import (
    wasserstein,
    wasserstein_1d,
    wasserstein_lp,
    wasserstein_bruteforce,
    metric_check,
    MetricCheckReport,
)

__all__ = [
    # 数据结构
    'QuadratureMethod',
    'QuadratureSpec',
    'QuadratureResult',
    'ShellMassSpec',
    'VoronoiGeometry',
    'ApproximantMode',
    'TransportPlan',
    'MomentBoundReport',
    'TailDecaySpec',
    'TruncationReport',

    # 测度
    'Atom',
    'DiscreteMeasure',
    'DensityMeasure',
    'Mixture',
    'Measure',
    'moment',
    'moment_with_error',
    'sample',
    'pushforward',
    'discretize',
    'total_mass',
    'support_box',
    'support_radius',
    'uniform_cube',
    'truncated_gaussian',
    'circle_arc',

    # 格
    'CellId',
    'Lattice',
    'LatticeKind',
    'decode',
    'decode_batch',
    'voronoi_geometry',
    'covering_count',
    'cells_intersecting_box',
    'cell_vertices',
    'cell_volume',

    # 量化
    'LatticeScheme',
    'SiteScheme',
    'VoronoiScheme',
    'Approximant',
    'AlignedSurrogate',
    'CellNodeSet',
    'aligned_surrogate',
    'quantize_lattice',
    'quantize_nonuniform',
    'nearest_sites',
    'mesh_norm',
    'separation_radius',
    'coupling_cost',
    'moment_bound_suite',
    'choose_h_for_budget',
    'term_count',
    'nterm_hypothesis',
    'dirac_realization',
    'cell_node_set',
    'realize',

    # 截断
    'project_to_ball',
    'truncation_error',
    'check_decay_conditions',
    'decay_inputs',
    'DensityEvaluator',

    # 精确运输
    'wasserstein',
    'wasserstein_1d',
    'wasserstein_lp',
    'wasserstein_bruteforce',
    'metric_check',
    'MetricCheckReport',
]
