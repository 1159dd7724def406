"""Evaluation metrics: utilizations, wait, slowdown, and comparison tables."""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from dfpsched.cluster import ClusterState, SimulationResult
from dfpsched.workload import JobState

log = logging.getLogger(__name__)


@dataclass
class RunReport:
    utilizations: tuple  # time-averaged, one fraction per resource
    avg_wait: float
    avg_slowdown: float
    job_count: int
    makespan: float


def instantaneous_measurement(cluster: ClusterState) -> np.ndarray:
    """Per-resource fraction of units in use at the current clock."""
    used = cluster.used()
    return np.array(
        [u / c for u, c in zip(used, cluster.capacities)], dtype=np.float64
    )


def time_averaged_utilization(series, capacities, horizon) -> tuple:
    """Exact piecewise-constant integral of used units over [t0, t1].

    series: list of (clock, used-units tuple); each entry holds from its
    clock until the next entry's clock.
    """
    t0, t1 = horizon
    if t1 <= t0:
        raise ValueError("empty horizon")
    used_area = np.zeros(len(capacities), dtype=np.float64)
    for i, (t, used) in enumerate(series):
        seg_start = max(t, t0)
        seg_end = t1 if i + 1 == len(series) else min(series[i + 1][0], t1)
        if seg_end > seg_start:
            used_area += np.array(used, dtype=np.float64) * (seg_end - seg_start)
    return tuple(used_area / (np.array(capacities, dtype=np.float64) * (t1 - t0)))


def job_metrics(result: SimulationResult):
    """(average wait seconds, average slowdown) over all finished jobs.

    Slowdown is unbounded: (wait + runtime) / runtime with the actual
    runtime, no clamp.
    """
    waits, slowdowns = [], []
    for job in result.jobs:
        if job.state is not JobState.FINISHED:
            raise ValueError(f"job {job.id} is not finished")
        wait = job.start_time - job.submit_time
        waits.append(wait)
        slowdowns.append((wait + job.runtime) / job.runtime)
    return float(np.mean(waits)), float(np.mean(slowdowns))


def build_report(result: SimulationResult,
                 horizon: Optional[tuple] = None) -> RunReport:
    """Summarize a finished run.

    The utilization horizon defaults to [first arrival, last completion].
    """
    avg_wait, avg_slowdown = job_metrics(result)
    first = min(j.submit_time for j in result.jobs)
    last = max(j.end_time for j in result.jobs)
    if horizon is None:
        horizon = (first, last)
    utils = time_averaged_utilization(result.series, result.capacities, horizon)
    return RunReport(
        utilizations=utils,
        avg_wait=avg_wait,
        avg_slowdown=avg_slowdown,
        job_count=len(result.jobs),
        makespan=float(last - min(j.start_time for j in result.jobs)),
    )


def metric_columns(n_resources: int, resource_names: Sequence[str]):
    return list(resource_names[:n_resources]) + ["avg_wait", "avg_slowdown"]


def report_values(report: RunReport):
    return list(report.utilizations) + [report.avg_wait, report.avg_slowdown]


def normalize_for_comparison(reports: Dict[str, RunReport]):
    """Normalize metrics across policies to [0, 1], 1 = best.

    Wait and slowdown are first transformed to reciprocals; every metric is
    then divided by its per-metric maximum. A zero wait (infinite reciprocal)
    is replaced by the per-metric maximum of the finite entries.
    """
    if len(reports) < 2:
        raise ValueError("need at least two policies to compare")
    policies = list(reports)
    n_res = len(next(iter(reports.values())).utilizations)
    columns = []
    for j in range(n_res):
        columns.append([reports[p].utilizations[j] for p in policies])
    for attr in ("avg_wait", "avg_slowdown"):
        raw = [getattr(reports[p], attr) for p in policies]
        recips = [1.0 / v if v > 0 else np.inf for v in raw]
        finite = [v for v in recips if np.isfinite(v)]
        if len(finite) < len(recips):
            sub = max(finite) if finite else 1.0
            log.warning("zero %s: reciprocal replaced by per-metric max", attr)
            recips = [v if np.isfinite(v) else sub for v in recips]
        columns.append(recips)
    table = {}
    for i, p in enumerate(policies):
        row = []
        for col in columns:
            peak = max(col)
            row.append(col[i] / peak if peak > 0 else 1.0)
        table[p] = row
    return table
