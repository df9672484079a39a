#!/usr/bin/env python3
"""Scenario engine: runs the verification scenarios and writes their reports."""

import logging
import time
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .config import ExperimentConfig
from .errors import InputError
from .scenarios.carleson import run_carleson
from .scenarios.geometry import run_geometry
from .scenarios.reports import Report
from .scenarios.schatten import run_schatten
from .scenarios.toeplitz_norms import run_toeplitz
from .scenarios.trace import run_trace

logger = logging.getLogger(__name__)

SCENARIOS: Dict[str, Callable[[ExperimentConfig, bool], Report]] = {
    "geometry": run_geometry,
    "carleson": run_carleson,
    "toeplitz": run_toeplitz,
    "schatten": run_schatten,
    "trace": run_trace,
}


def _run_one(args: Tuple[Mapping[str, Any], str, bool]) -> Tuple[str, Report, float]:
    """Pool worker: rebuild the config from its raw document and run one scenario."""
    raw, name, progress = args
    cfg = ExperimentConfig.from_dict(raw)
    start = time.time()
    report = SCENARIOS[name](cfg, progress)
    return name, report, time.time() - start


def run_scenarios(
    cfg: ExperimentConfig,
    names: Sequence[str],
    progress: bool = False,
    threads: Optional[int] = None,
) -> Dict[str, Any]:
    """Run scenarios and write one JSON report per scenario into ``cfg.output_dir``.

    Args:
        cfg: Validated experiment config
        names: Scenario names, a subset of :data:`SCENARIOS`
        progress: Show per-scenario progress bars (single worker only)
        threads: Worker processes (default: ``cfg.threads``)

    Returns:
        Dictionary with run results:
        {
            'reports': {name: Report},
            'paths': {name: Path},
            'passed': bool,
            'failed_flags': {name: [flag, ...]},
            'timings': {name: float},
            'processing_time': float,
        }
    """
    unknown = [n for n in names if n not in SCENARIOS]
    if unknown:
        raise InputError(f"unknown scenario(s): {', '.join(unknown)}")
    if not names:
        raise InputError("no scenarios selected")

    workers = min(threads or cfg.threads, len(names))
    args_list = [(cfg.raw, name, progress and workers == 1) for name in names]

    start_time = time.time()
    if workers == 1:
        results = [_run_one(args) for args in args_list]
    else:
        logger.info("running %d scenarios on %d workers", len(names), workers)
        with Pool(processes=workers) as pool:
            results = pool.map(_run_one, args_list)
    elapsed_time = time.time() - start_time

    # Reports are written serially so a partial run never interleaves files. Timings stay out
    # of the JSON: identical configs give identical report bytes.
    out_dir = Path(cfg.output_dir)
    reports: Dict[str, Report] = {}
    paths: Dict[str, Path] = {}
    timings: Dict[str, float] = {}
    for name, report, seconds in results:
        timings[name] = seconds
        reports[name] = report
        paths[name] = report.write(out_dir)
        if not report.passed:
            logger.warning("⚠️  %s: %d flag(s) failed", name, len(report.failed_flags))

    return {
        "reports": reports,
        "paths": paths,
        "passed": all(r.passed for r in reports.values()),
        "failed_flags": {n: r.failed_flags for n, r in reports.items()},
        "timings": timings,
        "processing_time": elapsed_time,
    }


def run_all(cfg: ExperimentConfig, progress: bool = False,
            threads: Optional[int] = None) -> Dict[str, Any]:
    return run_scenarios(cfg, list(SCENARIOS), progress, threads)


def scenario_names() -> List[str]:
    return list(SCENARIOS)
