"""
实验场景库
Built-in Experiment Scenarios

每个场景都是一个完整的实验配置（与 configs/*.json 格式相同），
可以直接交给 SweepConfig.from_dict
"""
import copy

# ==========================================
# 1. 常用测度
# ==========================================

UNIFORM_1D = {"type": "uniform_cube", "dim": 1, "side": 1.0}
UNIFORM_2D = {"type": "uniform_cube", "dim": 2, "side": 1.0}
UNIFORM_3D = {"type": "uniform_cube", "dim": 3, "side": 1.0}
GAUSSIAN_2D = {"type": "gaussian", "dim": 2, "sigma": 1.0 / 6.0, "truncation": 8.0}
CIRCLE_ARC = {"type": "circle_arc", "radius": 0.4, "n_atoms": 2048}
ORIGIN_2D = {"type": "dirac", "point": [0.0, 0.0]}

# ==========================================
# 2. 实验场景
# ==========================================

SCENARIOS = {
    "uniform_1d_h": {
        "name": "1D 均匀分布 - h 扫描",
        "description": "[−½,½] 上的均匀分布，Z¹ 格，实测值应为 h/(2√3)",
        "command": "sweep-h",
        "measure": UNIFORM_1D,
        "lattice": {"kind": "Zd", "dim": 1},
        "mode": "dirac",
        "p": 2,
        "values": [2.0 ** -k for k in range(1, 9)],
        "slope_window": [0.999, 1.001],
    },

    "uniform_2d_h": {
        "name": "2D 均匀分布 - h 扫描",
        "description": "单位正方形，Z² 格，界 √2·h",
        "command": "sweep-h",
        "measure": UNIFORM_2D,
        "lattice": {"kind": "Zd", "dim": 2},
        "mode": "dirac",
        "p": 2,
        "values": [2.0 ** -k for k in range(1, 6)],
        "slope_window": [0.9, 1.1],
    },

    "hexagonal_indicator_h": {
        "name": "2D 高斯 - A₂ 格 indicator 模式",
        "description": "截断高斯在六角格上的分片均匀近似",
        "command": "sweep-h",
        "measure": GAUSSIAN_2D,
        "lattice": {"kind": "A2", "dim": 2},
        "mode": "indicator",
        "p": 2,
        "values": [0.5, 0.25, 0.125],
    },

    "origin_h": {
        "name": "δ_0 - 退化扫描",
        "description": "原点处的单点测度，实测值恒为 0，斜率拟合标记为退化",
        "command": "sweep-h",
        "measure": ORIGIN_2D,
        "lattice": {"kind": "Zd", "dim": 2},
        "mode": "dirac",
        "p": 2,
        "values": [0.5, 0.25, 0.125, 0.0625],
    },

    "nterm_1d": {
        "name": "1D N 项量化",
        "description": "N ∈ {2, …, 256}，界 N^{−1}",
        "command": "sweep-n",
        "measure": UNIFORM_1D,
        "mode": "dirac",
        "p": 2,
        "values": [2 ** k for k in range(1, 9)],
        "slope_window": [-1.1, -0.9],
    },

    "nterm_2d": {
        "name": "2D N 项量化",
        "description": "N ∈ {4, 16, 64, 256, 1024}，界 √2·N^{−1/2}",
        "command": "sweep-n",
        "measure": UNIFORM_2D,
        "mode": "dirac",
        "p": 2,
        "values": [4, 16, 64, 256, 1024],
        "slope_window": [-0.55, -0.45],
    },

    "circle_arc_nterm": {
        "name": "圆弧（奇异测度）N 项量化",
        "description": "只断言界，斜率可以比 −1/2 更陡",
        "command": "sweep-n",
        "measure": CIRCLE_ARC,
        "mode": "dirac",
        "p": 2,
        "values": [4, 16, 64, 256, 1024],
    },

    "jittered_2d": {
        "name": "扰动网格站点",
        "description": "扰动 0.25 倍间距，W_p ≤ 2h_X 与 2C·N^{−1/2}",
        "command": "nonuniform",
        "measure": UNIFORM_2D,
        "sites": {"generator": "jittered_grid", "jitter": 0.25},
        "mode": "dirac",
        "p": 2,
        "values": [64, 256],
        "trials": 10,
    },

    "random_sites_2d": {
        "name": "随机均匀站点",
        "description": "均匀随机站点，W_p ≤ 2h_X；h_X 大于扰动网格",
        "command": "nonuniform",
        "measure": UNIFORM_2D,
        "sites": {"generator": "random_uniform"},
        "mode": "dirac",
        "p": 2,
        "values": [128],
        "trials": 10,
    },

    "gaussian_tail": {
        "name": "截断高斯 - 投影后量化",
        "description": "σ = 1/6，R = 3σ，W_p(μ, μ̂_h) ≤ diam(V_0)·h + 截断误差",
        "command": "tail",
        "measure": GAUSSIAN_2D,
        "lattice": {"kind": "Zd", "dim": 2},
        "mode": "dirac",
        "p": 2,
        "values": [0.5, 0.25, 0.125],
        "tail": {"R": 0.5, "epsilon": 0.1, "q": 2.0, "parameter": "h"},
    },

    "gaussian_tail_budget": {
        "name": "截断高斯 - 项数预算",
        "description": "h = 3(𝒩/N)^{1/d}，同时记录 rad(V_0) 形式的界",
        "command": "tail",
        "measure": GAUSSIAN_2D,
        "lattice": {"kind": "Zd", "dim": 2},
        "mode": "dirac",
        "p": 2,
        "values": [64, 256, 1024],
        "tail": {"R": 0.5, "epsilon": 0.1, "q": 2.0, "parameter": "N"},
    },

    "atom_tail": {
        "name": "原子尾部",
        "description": "B_R 外按 k^{−q} 衰减的原子",
        "command": "tail",
        "measure": {
            "type": "atoms",
            "locations": [[0.0, 0.0], [0.3, 0.1], [2.0, 0.0], [0.0, 3.0], [-4.0, 0.0]],
            "weights": [0.6, 0.37, 0.02, 0.007, 0.003],
        },
        "lattice": {"kind": "Zd", "dim": 2},
        "mode": "dirac",
        "p": 2,
        "values": [0.5, 0.25, 0.125],
        "tail": {"R": 1.0, "epsilon": 0.5, "q": 2.0, "parameter": "h"},
    },

    "baselines_2d": {
        "name": "基线比较",
        "description": "格量化器 vs 经验测度 vs Lloyd",
        "command": "baselines",
        "measure": UNIFORM_2D,
        "mode": "dirac",
        "p": 2,
        "values": [1, 4, 16, 64],
    },
}


def get_scenario(name: str) -> dict:
    """按名称取场景（返回副本）"""
    if name not in SCENARIOS:
        raise KeyError(f"未知场景: {name}，可选 {sorted(SCENARIOS)}")
    return copy.deepcopy(SCENARIOS[name])
