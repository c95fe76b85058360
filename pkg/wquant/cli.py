#!/usr/bin/env python3
"""
wquant 命令行入口

    wquant quantize|sweep-h|sweep-n|nonuniform|tail|baselines --config <file> [--jobs K] [--out DIR]
    wquant tail --measure m.json --R 2.5 --p 2 --epsilon 0.1
    wquant verify [--quick] [--jobs K] [--out DIR]

退出码：0 = 所有断言的界都成立，1 = 有界未通过，2 = 输入或计算错误
"""
import argparse
import json
import logging
import os
import sys
from typing import Callable, Dict, List, Optional

from . import __version__, config
from .data.presets import SCENARIOS, get_scenario
from .errors import WQuantError
from .harness.acceptance import run_acceptance
from .harness.baselines import run_baselines
from .harness.report import RunJournal, SweepReport, write_json, write_reports
from .harness.specs import COMMANDS, SweepConfig, build_measure, load_config
from .harness.sweeps import (run_h_sweep, run_nonuniform_trial, run_nterm_sweep, run_quantize, run_tail_check,
                             run_tail_experiment)

logger = logging.getLogger(__name__)

EXIT_PASS, EXIT_BOUND_FAILED, EXIT_ERROR = 0, 1, 2

RUNNERS: Dict[str, Callable] = {
    "sweep-h": run_h_sweep,
    "sweep-n": run_nterm_sweep,
    "nonuniform": run_nonuniform_trial,
    "tail": run_tail_experiment,
    "baselines": run_baselines,
}


def setup_logging(level: str = config.LOG_LEVEL):
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO),
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wquant", description="Wasserstein 空间中的 Voronoi 量化实验")
    parser.add_argument("--version", action="version", version=f"wquant {__version__}")
    parser.add_argument("--log-level", default=config.LOG_LEVEL, help="日志级别（默认取 WQUANT_LOG_LEVEL）")
    sub = parser.add_subparsers(dest="command", required=True)

    for command in COMMANDS:
        p = sub.add_parser(command, help=f"{command} 实验")
        source = p.add_mutually_exclusive_group(required=command != "tail")
        source.add_argument("--config", help="JSON 实验配置")
        source.add_argument("--preset", choices=sorted(SCENARIOS), help="内置场景")
        p.add_argument("--jobs", type=int, default=None, help="并行扫描点数（覆盖配置）")
        p.add_argument("--out", default=None, help="输出目录（覆盖配置）")
        if command == "tail":
            p.add_argument("--measure", help="只检查衰减条件：测度 JSON 文件")
            p.add_argument("--R", type=float, help="截断球半径")
            p.add_argument("--p", type=float, default=2.0)
            p.add_argument("--epsilon", type=float, default=0.1)
            p.add_argument("--q", type=float, default=2.0)

    v = sub.add_parser("verify", help="运行验收套件")
    v.add_argument("--quick", action="store_true", help="缩小规模的验收套件")
    v.add_argument("--jobs", type=int, default=None)
    v.add_argument("--out", default=None)
    return parser


def _load(args) -> SweepConfig:
    if args.preset:
        data = get_scenario(args.preset)
        if data["command"] != args.command:
            raise WQuantError(f"场景 {args.preset} 属于 {data['command']}，不是 {args.command}")
        cfg = SweepConfig.from_dict(data, args.command)
        cfg.name = args.preset
    else:
        cfg = load_config(args.config, args.command)
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.out is not None:
        cfg.out = args.out
    return cfg


def _exit_code(report: SweepReport) -> int:
    if report.passed:
        return EXIT_PASS
    for failure in report.failures[:20]:
        logger.error(f"[CLI] 未通过: {failure}")
    return EXIT_BOUND_FAILED


def _run_experiment(args, journal_box: List[Optional[RunJournal]]) -> int:
    cfg = _load(args)
    journal = RunJournal(cfg.out, cfg.command)
    journal_box[0] = journal
    journal.log("start", {"config": cfg.to_dict(), "jobs": cfg.jobs})
    config_dict = cfg.to_dict()

    def flush(partial: SweepReport):
        write_reports(partial, cfg.out, config_dict)
        journal.log("partial", {"rows": len(partial.rows), "notes": partial.notes})

    if cfg.command == "quantize":
        approximant, report = run_quantize(cfg)
        write_json(os.path.join(cfg.out, "approximant.json"), approximant.to_dict())
        write_reports(report, cfg.out, config_dict, plot=False)
    else:
        report = RUNNERS[cfg.command](cfg, flush)
        write_reports(report, cfg.out, config_dict)
    journal.log("finish", {"passed": report.passed, "rows": len(report.rows), "failures": report.failures})
    return _exit_code(report)


def _run_tail_check(args, journal_box: List[Optional[RunJournal]]) -> int:
    if args.R is None:
        raise WQuantError("tail --measure 需要 --R")
    out = args.out or config.DEFAULT_OUT_DIR
    journal = RunJournal(out, "tail")
    journal_box[0] = journal
    with open(args.measure, "r", encoding="utf-8") as f:
        spec = json.load(f)
    report = run_tail_check(build_measure(spec), args.R, args.p, args.epsilon, args.q)
    write_reports(report, out, {"measure": spec, "R": args.R, "p": args.p, "epsilon": args.epsilon,
                                "q": args.q}, plot=False)
    journal.log("finish", {"passed": report.passed, "failures": report.failures})
    return _exit_code(report)


def _run_verify(args, journal_box: List[Optional[RunJournal]]) -> int:
    out = args.out or config.DEFAULT_OUT_DIR
    jobs = args.jobs if args.jobs is not None else config.DEFAULT_JOBS
    journal = RunJournal(out, "verify")
    journal_box[0] = journal
    journal.log("start", {"quick": args.quick, "jobs": jobs})
    report = run_acceptance(quick=args.quick, jobs=jobs)
    write_reports(report, out, {"quick": args.quick}, plot=False)
    journal.log("finish", {"passed": report.passed, "criteria": report.extra["criteria"]})
    return _exit_code(report)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    journal_box: List[Optional[RunJournal]] = [None]
    try:
        if args.command == "verify":
            return _run_verify(args, journal_box)
        if args.command == "tail" and args.measure:
            return _run_tail_check(args, journal_box)
        if args.command == "tail" and not (args.config or args.preset):
            raise WQuantError("tail 需要 --config / --preset 或 --measure")
        return _run_experiment(args, journal_box)
    except (WQuantError, OSError, json.JSONDecodeError, KeyError) as exc:
        logger.error(f"[CLI] {type(exc).__name__}: {exc}")
        if journal_box[0] is not None:
            journal_box[0].log("error", {"type": type(exc).__name__, "message": str(exc)})
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
