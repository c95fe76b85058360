#!/usr/bin/env python3
"""
报告输出 - 斜率拟合、CSV / JSON / SVG 与运行日志

report.csv 与 report.json 只由配置和种子决定（逐字节可复现）；
运行日志 run_log.jsonl 带时间戳，不参与比对
"""
import csv
import io
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .. import config  # noqa: E402
from ..errors import InvalidInputError  # noqa: E402

logger = logging.getLogger(__name__)


# ==========================================
# 斜率拟合
# ==========================================

@dataclass(frozen=True)
class SlopeFit:
    """
    log-log 最小二乘拟合

    Attributes:
        slope / intercept: log y = slope·log x + intercept
        residual: 对数空间的最大绝对偏差
        n_rows: 参与拟合的行数
        excluded: 因非正值被排除的行下标
    """
    slope: float
    intercept: float
    residual: float
    n_rows: int
    excluded: Tuple[int, ...] = ()

    def to_dict(self) -> Dict:
        return {"slope": self.slope, "intercept": self.intercept, "residual": self.residual,
                "n_rows": self.n_rows, "excluded": list(self.excluded)}


def fit_slope(rows: Sequence[Tuple[float, float]]) -> SlopeFit:
    """
    对 (参数, 距离) 行做 log-log 最小二乘

    Args:
        rows: (parameter, distance) 序列；非正或非有限的距离被排除并记录

    Returns:
        SlopeFit: 拟合结果

    Raises:
        InvalidInputError: 有效行少于 3 行
    """
    params = np.array([float(r[0]) for r in rows])
    values = np.array([float(r[1]) if r[1] is not None else math.nan for r in rows])
    keep = (params > 0) & (values > 0) & np.isfinite(values)
    excluded = tuple(int(i) for i in np.nonzero(~keep)[0])
    if int(keep.sum()) < config.SLOPE_MIN_ROWS:
        raise InvalidInputError(f"斜率拟合至少需要 {config.SLOPE_MIN_ROWS} 行正值，当前 {int(keep.sum())}")
    x, y = np.log(params[keep]), np.log(values[keep])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.max(np.abs(y - (slope * x + intercept))))
    return SlopeFit(float(slope), float(intercept), residual, int(keep.sum()), excluded)


# ==========================================
# 行与报告
# ==========================================

@dataclass
class SweepRow:
    """
    一个扫描点

    Attributes:
        parameter: h 或 N
        measured_wp: 精确 W_p（None 表示只有上界的行）
        coupling_bound: 显式耦合代价
        theoretical_bound: 理论上界（diam(V_0)·h、2·h_X 等）
        terms: 近似测度的项数
        seed: 该点使用的种子
        exact_method: quantile / network_simplex / nearest_site / bound_only
        checks: 各不等式是否成立
        extra: 其它记录（网格范数、离散化误差、基线距离等）
    """
    parameter: float
    measured_wp: Optional[float]
    coupling_bound: float
    theoretical_bound: float
    terms: int
    seed: int
    exact_method: str = "bound_only"
    checks: Dict[str, bool] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def csv_fields(self) -> List[str]:
        measured = "" if self.measured_wp is None else repr(float(self.measured_wp))
        return [repr(float(self.parameter)), measured, repr(float(self.coupling_bound)),
                repr(float(self.theoretical_bound)), str(int(self.terms)), str(int(self.seed))]

    def to_dict(self) -> Dict:
        return {
            "parameter": self.parameter,
            "measured_wp": self.measured_wp,
            "coupling_bound": self.coupling_bound,
            "theoretical_bound": self.theoretical_bound,
            "terms": self.terms,
            "seed": self.seed,
            "exact_method": self.exact_method,
            "checks": dict(self.checks),
            "passed": self.passed,
            "extra": self.extra,
        }


@dataclass
class SweepReport:
    """
    一次实验的结果

    Attributes:
        name / command / parameter: 实验名、类型与扫描参数名（h 或 N）
        rows: 按配置顺序排列的扫描点
        slope: 拟合结果（退化时为 None）
        slope_source: 拟合使用的列（measured / coupling / none）
        slope_window: 斜率验收区间
        notes: 说明（部分报告、退化、假设未满足等）
        extra: 实验级附加记录
        partial: 是否因中途失败而只含部分行
        extra_failures: 不对应任何行的失败（验收套件中无扫描行的检查）
    """
    name: str
    command: str
    parameter: str
    rows: List[SweepRow] = field(default_factory=list)
    slope: Optional[SlopeFit] = None
    slope_source: str = "none"
    slope_window: Optional[Tuple[float, float]] = None
    notes: List[str] = field(default_factory=list)
    extra: Dict[str, Any] = field(default_factory=dict)
    partial: bool = False
    extra_failures: List[str] = field(default_factory=list)

    @property
    def slope_passed(self) -> Optional[bool]:
        if self.slope is None or self.slope_window is None:
            return None
        lo, hi = self.slope_window
        return lo <= self.slope.slope <= hi

    @property
    def failures(self) -> List[str]:
        out = []
        for i, row in enumerate(self.rows):
            for name, ok in row.checks.items():
                if not ok:
                    out.append(f"row {i} ({self.parameter}={row.parameter!r}, seed={row.seed}): {name}")
        if self.slope_passed is False:
            out.append(f"slope {self.slope.slope:.6f} outside {list(self.slope_window)}")
        out.extend(self.extra_failures)
        return out

    @property
    def passed(self) -> bool:
        return not self.partial and not self.failures

    def fit(self):
        """用实测列拟合斜率；实测行不足时退回耦合列；都不足时标记退化"""
        self.slope, self.slope_source = None, "none"
        for source in ("measured", "coupling"):
            column = [(r.parameter, r.measured_wp if source == "measured" else r.coupling_bound)
                      for r in self.rows]
            usable = [c for c in column if c[1] is not None and c[1] > 0]
            if len(usable) >= config.SLOPE_MIN_ROWS:
                self.slope = fit_slope(column)
                self.slope_source = source
                if source == "coupling":
                    self.notes.append("slope fitted on coupling_bound: fewer than 3 exact rows")
                return self
        if self.rows:
            self.notes.append("slope fit skipped: degenerate (fewer than 3 positive rows)")
        return self

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "command": self.command,
            "parameter": self.parameter,
            "passed": self.passed,
            "partial": self.partial,
            "slope": self.slope.to_dict() if self.slope else None,
            "slope_source": self.slope_source,
            "slope_window": list(self.slope_window) if self.slope_window else None,
            "slope_passed": self.slope_passed,
            "failures": self.failures,
            "notes": list(self.notes),
            "extra": self.extra,
            "rows": [r.to_dict() for r in self.rows],
        }


# ==========================================
# 文件输出
# ==========================================

def csv_text(rows: Sequence[SweepRow]) -> str:
    """固定列顺序的 CSV 文本（浮点数用 repr，保证逐字节可复现）"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(config.CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.csv_fields())
    return buffer.getvalue()


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"无法序列化 {type(value).__name__}")


def write_json(path: str, payload: Dict):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")


def write_plot(path: str, report: SweepReport):
    """
    log-log 图：实测 W_p、耦合上界、理论上界，以及 extra 中的基线曲线
    """
    plt.rcParams["svg.hashsalt"] = "wquant"
    fig, ax = plt.subplots(figsize=(7, 6))
    params = np.array([r.parameter for r in report.rows], dtype=float)
    series = [
        ("coupling bound", [r.coupling_bound for r in report.rows], "b^--"),
        ("theoretical bound", [r.theoretical_bound for r in report.rows], "k-"),
        ("measured $W_p$", [r.measured_wp for r in report.rows], "ko"),
    ]
    for key, label, style in (("empirical_mean", "empirical", "gs:"), ("lloyd", "Lloyd", "md:")):
        if report.rows and all(key in r.extra for r in report.rows):
            series.append((label, [r.extra[key] for r in report.rows], style))
    for label, values, style in series:
        y = np.array([math.nan if v is None else float(v) for v in values])
        keep = (y > 0) & np.isfinite(y)
        if np.any(keep):
            ax.loglog(params[keep], y[keep], style, label=label)
    if report.slope is not None:
        label = f"fit: slope {report.slope.slope:.3f}"
        ax.loglog(params, np.exp(report.slope.intercept) * params ** report.slope.slope, "r--", label=label)
    ax.grid(True)
    ax.set_xlabel(report.parameter)
    ax.set_ylabel("distance")
    ax.set_title(report.name)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="best")
    fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)


def write_reports(report: SweepReport, out_dir: str, config_dict: Optional[Dict] = None,
                  plot: bool = True) -> Dict[str, str]:
    """
    写出 report.csv / report.json / plot.svg

    Args:
        report: 实验结果
        out_dir: 输出目录（不存在时创建）
        config_dict: 写入 JSON 的配置回显
        plot: 是否生成 plot.svg

    Returns:
        Dict[str, str]: 文件名到路径
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "csv": os.path.join(out_dir, config.CSV_FILENAME),
        "json": os.path.join(out_dir, config.JSON_FILENAME),
        "plot": os.path.join(out_dir, config.PLOT_FILENAME),
    }
    with open(paths["csv"], "w", encoding="utf-8", newline="") as f:
        f.write(csv_text(report.rows))
    payload = report.to_dict()
    if config_dict is not None:
        payload["config"] = config_dict
    write_json(paths["json"], payload)
    if plot and report.rows:
        write_plot(paths["plot"], report)
    logger.info(f"[Report] {report.name}: {len(report.rows)} 行写入 {out_dir}"
                f"{'（部分报告）' if report.partial else ''}")
    return paths


# ==========================================
# 运行日志
# ==========================================

class RunJournal:
    """
    运行日志（JSONL，每个事件一行）

    记录时间戳与相对开始时间，位于输出目录下，不参与逐字节比对
    """

    def __init__(self, out_dir: str, command: str):
        self.path = os.path.join(out_dir, config.RUN_LOG_FILENAME)
        self.command = command
        self.start = time.time()
        os.makedirs(out_dir, exist_ok=True)

    def log(self, action: str, details: Optional[Dict] = None):
        """
        追加一条记录

        Args:
            action: 事件类型（start / row / finish / error）
            details: 事件详情
        """
        entry = {
            "timestamp": datetime.now().isoformat(),
            "elapsed_time": round(time.time() - self.start, 3),
            "command": self.command,
            "action": action,
            "details": details or {},
        }
        try:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(entry, ensure_ascii=False, default=_json_default) + "\n")
        except OSError as exc:
            logger.warning(f"[Report] 运行日志写入失败: {exc}")
