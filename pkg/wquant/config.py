#!/usr/bin/env python3
"""
配置文件 - wquant 测度量化实验配置

所有常量都可以通过环境变量（或 .env 文件）中的 WQUANT_* 覆盖
"""
import os
from dotenv import load_dotenv

load_dotenv()


def _env_float(name: str, default: float) -> float:
    value = os.getenv(name)
    return float(value) if value not in (None, "") else default


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    return int(value) if value not in (None, "") else default


# ==========================================
# 运行环境
# ==========================================

DEFAULT_JOBS = _env_int("WQUANT_JOBS", 1)            # 并行扫描点数上限（--jobs 覆盖）
DEFAULT_OUT_DIR = os.getenv("WQUANT_OUT_DIR", "out")  # 报告输出目录（--out 覆盖）
LOG_LEVEL = os.getenv("WQUANT_LOG_LEVEL", "INFO")
RUN_LOG_FILENAME = "run_log.jsonl"                    # 运行日志（不参与逐字节比对）

# ==========================================
# 容差
# ==========================================

MASS_TOLERANCE = 1e-12             # 测度总质量 = 1
APPROXIMANT_MASS_TOLERANCE = 1e-10  # 近似测度总质量 = 1
BOUND_TOLERANCE = 1e-9             # coupling ≤ 理论界
MEASURED_TOLERANCE = 1e-8          # 实测 W_p ≤ coupling
DUALITY_TOLERANCE = 1e-9           # 网络单纯形对偶间隙（相对 1 + cost）
MARGINAL_TOLERANCE = 1e-10         # 运输方案边缘约束
TIE_RELATIVE_TOLERANCE = 1e-12     # 最近格点判定中的并列阈值
RENORMALIZATION_LIMIT = 1e-6       # 允许的质量重归一化幅度（超出则告警）

# ==========================================
# measure-core
# ==========================================

ATOM_DROP_THRESHOLD = 1e-15         # 合并后权重低于该值的原子被丢弃
GAUSSIAN_TRUNCATION = _env_float("WQUANT_GAUSSIAN_TRUNCATION", 8.0)  # 截断倍数（σ）
MAX_MIXTURE_DEPTH = 8
TENSOR_NODES_PER_AXIS = _env_int("WQUANT_TENSOR_NODES", 64)      # d ≤ 2 默认张量网格
MONTE_CARLO_SAMPLES = _env_int("WQUANT_MC_SAMPLES", 100_000)     # d ≥ 3 默认蒙特卡洛样本
TENSOR_GRID_MAX_DIM = 2
MIN_ACCEPTANCE_RATE = 1e-6          # 拒绝采样接受率下限
PUSHFORWARD_SAMPLES = _env_int("WQUANT_PUSHFORWARD_SAMPLES", 1000)  # 密度推前的样本代理规模
SAMPLING_CHUNK = 65_536             # 每个随机流分块的点数
CIRCLE_ARC_ATOMS = 2048

# ==========================================
# lattice
# ==========================================

MAX_CELLS = 10 ** 8                 # 枚举格点数量上限
GENERAL_LATTICE_MAX_DIM = 4         # 一般格 Voronoi 几何仅支持 d ≤ 4
DECODE_CHUNK = 16_384

# ==========================================
# quantize
# ==========================================

CELL_GAUSS_NODES = _env_int("WQUANT_CELL_GAUSS_NODES", 2)   # 每个子盒每轴 Gauss–Legendre 节点
CELL_FILTER_NODES = _env_int("WQUANT_CELL_FILTER_NODES", 8) # 非 Z^d 格：胞元包围盒每轴节点（解码过滤）
NEAREST_SITE_CANDIDATES = 8         # 最近站点查询的候选数（并列时按下标取最小）
SITE_CELL_MAX_NODES = 2_000_000     # 非均匀 indicator 模式：区域网格节点总数上限
INDICATOR_NODES_PER_AXIS = 32       # indicator 模式代价积分，每轴节点
INDICATOR_MAX_NODES_PER_CELL = 4096 # 每个胞元节点总数上限（高维时每轴自动降低）
INDICATOR_OT_NODES_PER_DIM = 16     # indicator 模式精确 OT 的每胞元节点 k = 16·d
MESH_NORM_REFINE_TOLERANCE = 1e-3   # 证书变化 < 1e-3·R 时停止细化
MESH_NORM_MAX_POINTS = _env_int("WQUANT_MESH_NORM_MAX_POINTS", 4_000_000)
SEPARATION_BRUTE_FORCE_LIMIT = 10_000

# ==========================================
# ot-exact
# ==========================================

LP_MAX_PAIRS = 10 ** 7              # |supp μ|·|supp ν| 上限
EMD_MAX_ITER = _env_int("WQUANT_EMD_MAX_ITER", 10_000_000)
BRUTE_FORCE_MAX_PERMUTATION = 7
BRUTE_FORCE_MAX_SUPPORT = 10

# ==========================================
# harness
# ==========================================

LLOYD_SAMPLES = _env_int("WQUANT_LLOYD_SAMPLES", 100_000)
LLOYD_ITERATIONS = 50
BASELINE_SEEDS = 20
SLOPE_MIN_ROWS = 3
CSV_COLUMNS = ["parameter", "measured_wp", "coupling_bound", "theoretical_bound", "terms", "seed"]
HARNESS_LP_PAIRS = _env_int("WQUANT_HARNESS_LP_PAIRS", 2_000_000)  # 扫描中调用网络单纯形的规模上限
DEFAULT_JITTER = 0.25               # jittered_grid 的默认扰动（占网格间距的比例）
SITE_REGENERATE_ATTEMPTS = 8        # 退化站点集重新生成的次数
PLOT_FILENAME = "plot.svg"
CSV_FILENAME = "report.csv"
JSON_FILENAME = "report.json"
