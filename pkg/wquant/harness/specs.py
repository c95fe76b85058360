#!/usr/bin/env python3
"""
实验规格解析

把 JSON 配置翻译成测度、格与站点生成器：
- measure: uniform_cube / gaussian / atoms / dirac / random_atoms / circle_arc / mixture
- lattice: Lattice.from_dict 的格式
- sites:   jittered_grid / random_uniform
"""
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .. import config
from ..core.lattice import Lattice
from ..core.measures import (DiscreteMeasure, Measure, Mixture, circle_arc, support_box,
                             truncated_gaussian, uniform_cube)
from ..core.models import ApproximantMode, QuadratureSpec
from ..core.utils import rng_for_chunk
from ..errors import InvalidInputError

logger = logging.getLogger(__name__)

COMMANDS = ("quantize", "sweep-h", "sweep-n", "nonuniform", "tail", "baselines")


# ==========================================
# 测度
# ==========================================

def _quadrature(spec: Dict) -> Optional[QuadratureSpec]:
    if "quadrature" not in spec:
        return None
    q = spec["quadrature"]
    return QuadratureSpec(q.get("method", "tensor_grid"),
                          int(q.get("samples_or_nodes_per_axis", config.TENSOR_NODES_PER_AXIS)),
                          int(q.get("seed", 0)))


def random_atoms(dim: int, n_atoms: int, seed: int = 0, low: float = -0.5, high: float = 0.5) -> DiscreteMeasure:
    """盒 [low, high]^d 内 n 个均匀位置、随机权重的原子"""
    if n_atoms < 1:
        raise InvalidInputError("n_atoms 必须 ≥ 1")
    rng = rng_for_chunk(seed, 0)
    locations = rng.uniform(low, high, size=(n_atoms, dim))
    weights = rng.uniform(0.1, 1.0, size=n_atoms)
    return DiscreteMeasure(locations, weights)


def build_measure(spec: Dict, depth: int = 0) -> Measure:
    """
    从 JSON 规格构造测度

    Args:
        spec: {"type": ..., 其余字段按类型}
        depth: 混合嵌套深度（内部使用）

    Returns:
        Measure: 测度
    """
    if not isinstance(spec, dict) or "type" not in spec:
        raise InvalidInputError(f"测度规格必须是带 type 字段的对象: {spec!r}")
    kind = spec["type"]

    if kind == "uniform_cube":
        return uniform_cube(int(spec["dim"]), spec.get("center"), float(spec.get("side", 1.0)),
                            quadrature=_quadrature(spec))
    if kind == "gaussian":
        return truncated_gaussian(int(spec["dim"]), float(spec.get("sigma", 1.0)), spec.get("mean"),
                                  float(spec.get("truncation", config.GAUSSIAN_TRUNCATION)),
                                  quadrature=_quadrature(spec))
    if kind == "atoms":
        locations = np.asarray(spec["locations"], dtype=float)
        if locations.ndim == 1:
            locations = locations.reshape(-1, 1)
        return DiscreteMeasure(locations, spec.get("weights"))
    if kind == "dirac":
        return DiscreteMeasure.dirac(spec["point"])
    if kind == "random_atoms":
        return random_atoms(int(spec["dim"]), int(spec.get("n_atoms", 50)), int(spec.get("seed", 0)),
                            float(spec.get("low", -0.5)), float(spec.get("high", 0.5)))
    if kind == "circle_arc":
        return circle_arc(float(spec.get("radius", 0.4)), float(spec.get("start", 0.0)),
                          float(spec.get("end", 2 * math.pi)), int(spec.get("n_atoms", config.CIRCLE_ARC_ATOMS)),
                          spec.get("center", (0.0, 0.0)))
    if kind == "mixture":
        if depth >= config.MAX_MIXTURE_DEPTH:
            raise InvalidInputError(f"混合深度超过 {config.MAX_MIXTURE_DEPTH}")
        return Mixture([(float(c["weight"]), build_measure(c["measure"], depth + 1))
                        for c in spec["components"]])
    raise InvalidInputError(f"未知测度类型: {kind}")


# ==========================================
# 站点生成器
# ==========================================

def jittered_grid(n: int, box: Tuple[np.ndarray, np.ndarray], jitter: float, seed: int = 0) -> np.ndarray:
    """
    盒子等分成 m^d 个小格，站点取小格中心再加 [−jitter, jitter]·间距 内的均匀扰动

    Args:
        n: 站点数（必须是 d 次方数）
        box: (lower, upper)
        jitter: 扰动占间距的比例，0 ≤ jitter < ½
        seed: 随机种子

    Returns:
        np.ndarray: (n, d) 站点
    """
    lower, upper = (np.asarray(b, dtype=float) for b in box)
    d = lower.shape[0]
    m = int(round(n ** (1.0 / d)))
    if m ** d != n:
        raise InvalidInputError(f"jittered_grid 的站点数 {n} 不是 {d} 次方数")
    if not 0 <= jitter < 0.5:
        raise InvalidInputError(f"jitter 必须在 [0, ½) 内，当前 {jitter}")
    spacing = (upper - lower) / m
    axes = [lower[k] + (np.arange(m) + 0.5) * spacing[k] for k in range(d)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    if jitter == 0:
        return grid
    offsets = rng_for_chunk(seed, 0).uniform(-jitter, jitter, size=grid.shape) * spacing
    return grid + offsets


def random_uniform(n: int, box: Tuple[np.ndarray, np.ndarray], seed: int = 0) -> np.ndarray:
    """盒内 n 个独立均匀站点"""
    lower, upper = (np.asarray(b, dtype=float) for b in box)
    return rng_for_chunk(seed, 0).uniform(lower, upper, size=(n, lower.shape[0]))


def generate_sites(spec: Dict, n: int, box: Tuple[np.ndarray, np.ndarray], seed: int) -> Tuple[np.ndarray, int]:
    """
    按规格生成站点；出现重复站点时换下一个种子重新生成

    Args:
        spec: {"generator": "jittered_grid" | "random_uniform", "jitter": ...}
        n: 站点数
        box: 生成区域
        seed: 起始种子

    Returns:
        (sites, used_seed)
    """
    generator = spec.get("generator", "jittered_grid")
    for attempt in range(config.SITE_REGENERATE_ATTEMPTS):
        current = seed + attempt
        if generator == "jittered_grid":
            sites = jittered_grid(n, box, float(spec.get("jitter", config.DEFAULT_JITTER)), current)
        elif generator == "random_uniform":
            sites = random_uniform(n, box, current)
        else:
            raise InvalidInputError(f"未知站点生成器: {generator}")
        if np.unique(sites, axis=0).shape[0] == n:
            return sites, current
        logger.warning(f"[Sweep] 种子 {current} 生成了重复站点，改用种子 {current + 1}")
    raise InvalidInputError(f"连续 {config.SITE_REGENERATE_ATTEMPTS} 个种子都生成了退化站点集")


# ==========================================
# 扫描配置
# ==========================================

@dataclass
class SweepConfig:
    """
    一次实验的完整配置

    Attributes:
        command: 实验类型（sweep-h / sweep-n / nonuniform / tail / baselines / quantize）
        measure_spec: 测度 JSON 规格
        lattice_spec: 格 JSON 规格（None 表示 Z^d）
        sites_spec: 站点生成器规格
        mode: dirac / indicator
        p: 代价指数
        values: 扫描参数（h 严格递减；N 严格递增）
        seed: 随机种子
        trials: 非均匀实验每个 N 的试验次数
        slope_window: 斜率验收区间（可选）
        tail: 尾部实验参数 {"R", "epsilon", "q", "parameter"}
        jobs / out: 并行度与输出目录
    """
    command: str
    measure_spec: Dict[str, Any]
    lattice_spec: Optional[Dict[str, Any]] = None
    sites_spec: Optional[Dict[str, Any]] = None
    mode: ApproximantMode = ApproximantMode.DIRAC
    p: float = 2.0
    values: List[float] = field(default_factory=list)
    seed: int = 0
    trials: int = 1
    slope_window: Optional[Tuple[float, float]] = None
    tail: Dict[str, Any] = field(default_factory=dict)
    name: str = ""
    jobs: int = config.DEFAULT_JOBS
    out: str = config.DEFAULT_OUT_DIR

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidInputError(f"未知实验类型: {self.command}")
        self.mode = ApproximantMode(self.mode)
        if not self.p >= 1:
            raise InvalidInputError(f"p 必须 ≥ 1，当前 {self.p}")
        if not self.values:
            raise InvalidInputError("values 不能为空")
        values = [float(v) for v in self.values]
        if any(v <= 0 for v in values):
            raise InvalidInputError("扫描参数必须全部为正")
        if self.parameter == "h":
            if any(b >= a for a, b in zip(values, values[1:])):
                raise InvalidInputError("h 序列必须严格递减")
        else:
            if any(b <= a for a, b in zip(values, values[1:])):
                raise InvalidInputError("N 序列必须严格递增")
            if any(not float(v).is_integer() for v in values):
                raise InvalidInputError("N 必须是整数")
        self.values = values
        if self.trials < 1:
            raise InvalidInputError("trials 必须 ≥ 1")
        if self.jobs < 1:
            raise InvalidInputError("jobs 必须 ≥ 1")
        if self.slope_window is not None:
            lo, hi = (float(v) for v in self.slope_window)
            if lo > hi:
                raise InvalidInputError("slope_window 下界大于上界")
            self.slope_window = (lo, hi)
        if self.command == "nonuniform" and self.sites_spec is None:
            self.sites_spec = {"generator": "jittered_grid", "jitter": config.DEFAULT_JITTER}
        if self.command == "tail" and "R" not in self.tail:
            raise InvalidInputError("tail 实验需要 tail.R")

    @property
    def parameter(self) -> str:
        """扫描参数是 h 还是 N"""
        if self.command == "quantize":
            return "N" if self.sites_spec else "h"
        if self.command == "sweep-h":
            return "h"
        if self.command == "tail":
            return self.tail.get("parameter", "h")
        return "N"

    def build_measure(self) -> Measure:
        return build_measure(self.measure_spec)

    def build_lattice(self, dim: int) -> Lattice:
        if self.lattice_spec is None:
            return Lattice.integer(dim)
        lattice = Lattice.from_dict(self.lattice_spec)
        if lattice.dim != dim:
            raise InvalidInputError(f"格维数 {lattice.dim} 与测度维数 {dim} 不一致")
        return lattice

    def site_box(self, measure: Measure) -> Tuple[np.ndarray, np.ndarray]:
        if self.sites_spec and "box" in self.sites_spec:
            lo, hi = self.sites_spec["box"]
            return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        return support_box(measure)

    def to_dict(self) -> Dict:
        return {
            "command": self.command,
            "name": self.name,
            "measure": self.measure_spec,
            "lattice": self.lattice_spec,
            "sites": self.sites_spec,
            "mode": self.mode.value,
            "p": self.p,
            "values": list(self.values),
            "seed": self.seed,
            "trials": self.trials,
            "slope_window": list(self.slope_window) if self.slope_window else None,
            "tail": self.tail,
        }

    @classmethod
    def from_dict(cls, data: Dict, command: Optional[str] = None) -> "SweepConfig":
        """
        从 JSON 对象构造；command 参数（CLI 子命令）优先于文件中的 command 字段
        """
        command = command or data.get("command")
        if command is None:
            raise InvalidInputError("配置缺少 command")
        if "measure" not in data:
            raise InvalidInputError("配置缺少 measure")
        return cls(
            command=command,
            measure_spec=data["measure"],
            lattice_spec=data.get("lattice"),
            sites_spec=data.get("sites"),
            mode=data.get("mode", "dirac"),
            p=float(data.get("p", 2.0)),
            values=list(data.get("values", [])),
            seed=int(data.get("seed", 0)),
            trials=int(data.get("trials", 1)),
            slope_window=data.get("slope_window"),
            tail=dict(data.get("tail", {})),
            name=data.get("name", command),
            jobs=int(data.get("jobs", config.DEFAULT_JOBS)),
            out=data.get("out", config.DEFAULT_OUT_DIR),
        )


def load_config(path: str, command: Optional[str] = None) -> SweepConfig:
    """读取 JSON 配置文件"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"配置文件 {path} 不是合法 JSON: {exc}") from exc
    return SweepConfig.from_dict(data, command)
