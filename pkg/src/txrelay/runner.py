"""Single runs and parameter sweeps with on-disk reports."""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Iterable

from .adversary import observations_to_csv
from .config import ExperimentConfig
from .engine import simulate
from .metrics import report_json, run_metrics

__all__ = ["aggregate_runs", "execute", "report_dir", "run_single", "run_sweep", "sweep_points"]

log = logging.getLogger(__name__)

CELL_METRICS = (
    "median_t90",
    "mean_t90",
    "first_spy_accuracy",
    "mean_hops",
    "full_coverage_fraction",
    "retries",
    "messages_total",
)


def execute(cfg: ExperimentConfig, seed: int) -> tuple[dict[str, Any], str, list[str] | None]:
    """Run one simulation; returns (metrics, observation CSV, trace lines)."""
    result = simulate(cfg, seed)
    # where a report is written is not part of its provenance
    config = {k: v for k, v in cfg.flat().items() if k != "run.out"}
    metrics = run_metrics(result, config, seed)
    return metrics, observations_to_csv(result.observations), result.trace


def run_single(cfg: ExperimentConfig, out: str | Path | None = None, seed: int | None = None) -> dict[str, Any]:
    seed = cfg.run.seed if seed is None else seed
    metrics, obs_csv, trace = execute(cfg, seed)
    out_dir = Path(out if out is not None else cfg.run.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report_json(metrics))
    (out_dir / "observations.csv").write_text(obs_csv)
    if trace is not None:
        (out_dir / "trace.txt").write_text("\n".join(trace) + ("\n" if trace else ""))
    if not metrics["quiescent"]:
        log.warning("run reached t_end=%s with pending events", cfg.run.t_end)
    return metrics


def sweep_points(cfg: ExperimentConfig) -> list[tuple[tuple[str, Any], ...]]:
    """Cartesian product of sweep axes, ordered lexicographically by axis name then value."""
    if not cfg.sweep:
        raise ValueError("config has no sweep axes")
    axes = sorted((name, sorted(set(values))) for name, values in cfg.sweep)
    names = [name for name, _ in axes]
    return [tuple(zip(names, combo)) for combo in itertools.product(*(v for _, v in axes))]


def _sweep_job(args: tuple[ExperimentConfig, int, int, int, tuple]) -> tuple[int, int, dict[str, Any], list[str] | None]:
    cfg, cell, replica, seed, point = args
    try:
        metrics, _, trace = execute(cfg, seed)
    except Exception as exc:  # a failing cell must not abort the sweep
        metrics, trace = {"error": f"{type(exc).__name__}: {exc}", "seed": seed}, None
    metrics["sweep"] = {"cell": cell, "replica": replica, "point": dict(point)}
    return cell, replica, metrics, trace


def run_sweep(cfg: ExperimentConfig, out: str | Path | None = None, jobs: int = 1) -> Path:
    out_dir = Path(out if out is not None else cfg.run.out)
    runs_dir = out_dir / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    tasks = []
    for cell, point in enumerate(sweep_points(cfg)):
        cell_cfg = cfg
        for key, value in point:
            cell_cfg = cell_cfg.with_value(key, value)
        cell_cfg = replace(cell_cfg, sweep=()).validate()
        for r in range(cfg.run.replicas):
            tasks.append((cell_cfg, cell, r, cfg.run.seed + r, point))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_job, tasks))
    else:
        results = [_sweep_job(t) for t in tasks]
    # merge in (cell, replica) order regardless of completion order
    for cell, replica, metrics, trace in sorted(results, key=lambda x: (x[0], x[1])):
        stem = f"cell{cell:03d}_rep{replica:03d}"
        (runs_dir / f"{stem}.json").write_text(report_json(metrics))
        if trace is not None:
            (runs_dir / f"{stem}.trace").write_text("\n".join(trace) + ("\n" if trace else ""))
    return report_dir(out_dir)


def _load_runs(runs_dir: Path) -> list[dict[str, Any]]:
    runs = [json.loads(p.read_text()) for p in sorted(runs_dir.glob("cell*_rep*.json"))]
    runs.sort(key=lambda m: (m["sweep"]["cell"], m["sweep"]["replica"]))
    return runs


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def aggregate_runs(runs: Iterable[dict[str, Any]]) -> tuple[str, str]:
    """Long-format per-run CSV and per-cell summary CSV."""
    runs = list(runs)
    axes = sorted({k for m in runs for k in m["sweep"]["point"]})
    long_buf, cell_buf = io.StringIO(), io.StringIO()
    w = csv.writer(long_buf, lineterminator="\n")
    w.writerow(["cell", "replica", "seed", *axes, "metric", "value"])
    by_cell: dict[int, list[dict[str, Any]]] = {}
    for m in runs:
        sw = m["sweep"]
        point = [_fmt(sw["point"].get(a)) for a in axes]
        by_cell.setdefault(sw["cell"], []).append(m)
        if "error" in m:
            w.writerow([sw["cell"], sw["replica"], m.get("seed"), *point, "error", m["error"]])
            continue
        for key in sorted(m["aggregates"]):
            w.writerow([sw["cell"], sw["replica"], m["seed"], *point, key, _fmt(m["aggregates"][key])])
    cw = csv.writer(cell_buf, lineterminator="\n")
    cw.writerow(["cell", *axes, "replicas", "errors", *(f"median_{k}" if not k.startswith("median") else k for k in CELL_METRICS)])
    for cell in sorted(by_cell):
        group = by_cell[cell]
        ok = [m for m in group if "error" not in m]
        point = [_fmt(group[0]["sweep"]["point"].get(a)) for a in axes]
        meds = []
        for key in CELL_METRICS:
            vals = [m["aggregates"][key] for m in ok if m["aggregates"].get(key) is not None]
            meds.append(_fmt(float(statistics.median(vals))) if vals else "")
        cw.writerow([cell, *point, len(group), len(group) - len(ok), *meds])
    return long_buf.getvalue(), cell_buf.getvalue()


def report_dir(out_dir: str | Path) -> Path:
    """Re-aggregate ``<out_dir>/runs/*.json`` into ``sweep.csv`` and ``cells.csv``."""
    out_dir = Path(out_dir)
    runs = _load_runs(out_dir / "runs")
    if not runs:
        raise FileNotFoundError(f"no run reports under {out_dir / 'runs'}")
    long_csv, cells_csv = aggregate_runs(runs)
    (out_dir / "sweep.csv").write_text(long_csv)
    (out_dir / "cells.csv").write_text(cells_csv)
    return out_dir / "sweep.csv"
