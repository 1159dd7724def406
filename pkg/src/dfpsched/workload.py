"""Job traces: parsing, validation, scenario synthesis, and jobset generation."""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

SECONDS_PER_HOUR = 3600
SECONDS_PER_DAY = 24 * SECONDS_PER_HOUR
SECONDS_PER_WEEK = 7 * SECONDS_PER_DAY


class TraceError(Exception):
    """Raised on malformed or rejected trace input."""


class JobState(Enum):
    QUEUED = "queued"
    RUNNING = "running"
    RESERVED = "reserved"
    FINISHED = "finished"


@dataclass
class Job:
    id: int
    submit_time: int
    runtime: int
    walltime_estimate: int
    request: tuple  # one non-negative int per resource, config order
    state: JobState = JobState.QUEUED
    start_time: Optional[int] = None
    end_time: Optional[int] = None

    def validate(self, capacities: Sequence[int]):
        if self.runtime <= 0:
            raise TraceError(f"job {self.id}: runtime must be > 0")
        if self.walltime_estimate <= 0:
            raise TraceError(f"job {self.id}: walltime_estimate must be > 0")
        if len(self.request) != len(capacities):
            raise TraceError(
                f"job {self.id}: request has {len(self.request)} entries, "
                f"expected {len(capacities)}"
            )
        if any(r < 0 for r in self.request):
            raise TraceError(f"job {self.id}: negative resource request")


@dataclass(frozen=True)
class ResourceSpec:
    name: str
    capacity_units: int
    unit_label: str = "unit"

    def __post_init__(self):
        if self.capacity_units < 1:
            raise ValueError(f"resource {self.name}: capacity_units must be >= 1")


@dataclass(frozen=True)
class ScenarioSpec:
    scenario_id: str = "Custom"
    bb_fraction: float = 0.0
    bb_range_units: tuple = (0, 0)
    node_scale: float = 1.0
    power_range_w: Optional[tuple] = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.bb_fraction <= 1.0:
            raise ValueError("bb_fraction must be in [0, 1]")
        if self.bb_range_units[0] > self.bb_range_units[1]:
            raise ValueError("bb_range_units min > max")
        if self.power_range_w is not None and self.power_range_w[0] > self.power_range_w[1]:
            raise ValueError("power_range_w min > max")


# Burst-buffer contention scenarios: (node_scale, bb_fraction, bb range in TB units).
# S6-S10 repeat S1-S5 with a per-node power draw added.
_BB_SCENARIOS = {
    "S1": (1.0, 0.50, (5, 285)),
    "S2": (1.0, 0.75, (5, 285)),
    "S3": (1.0, 0.50, (20, 285)),
    "S4": (1.0, 0.75, (20, 285)),
    "S5": (0.5, 0.75, (20, 285)),
}
_POWER_RANGE_W = (100, 215)


def preset_scenario(scenario_id: str, seed: int = 0,
                    bb_range_units: Optional[tuple] = None) -> ScenarioSpec:
    """Build one of the S1-S10 preset scenarios.

    bb_range_units overrides the preset burst-buffer range so the presets can
    be used on systems whose buffer is smaller than the reference 285-unit one.
    """
    sid = scenario_id.upper()
    if sid in _BB_SCENARIOS:
        scale, frac, rng = _BB_SCENARIOS[sid]
        power = None
    elif sid.startswith("S") and sid[1:].isdigit() and 6 <= int(sid[1:]) <= 10:
        scale, frac, rng = _BB_SCENARIOS[f"S{int(sid[1:]) - 5}"]
        power = _POWER_RANGE_W
    else:
        raise ValueError(f"unknown scenario id: {scenario_id}")
    if bb_range_units is not None:
        rng = tuple(bb_range_units)
    return ScenarioSpec(scenario_id=sid, bb_fraction=frac, bb_range_units=rng,
                        node_scale=scale, power_range_w=power, seed=seed)


def _sort_jobs(jobs):
    return sorted(jobs, key=lambda j: (j.submit_time, j.id))


def parse_native_trace(path, resources: Sequence[ResourceSpec]):
    """Parse the native CSV trace format.

    Header: job_id,submit_time,runtime,walltime_estimate,<resource columns in
    configuration order>. Comment lines start with '#'. Returns jobs sorted by
    (submit_time, id).
    """
    expected = ["job_id", "submit_time", "runtime", "walltime_estimate"] + [
        r.name for r in resources
    ]
    capacities = [r.capacity_units for r in resources]
    jobs = []
    header_seen = False
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = [c.strip() for c in line.split(",")]
            if not header_seen:
                if fields != expected:
                    raise TraceError(
                        f"{path}: line {lineno}: header {fields} does not match "
                        f"expected {expected}"
                    )
                header_seen = True
                continue
            if len(fields) != len(expected):
                raise TraceError(f"{path}: line {lineno}: expected {len(expected)} columns")
            try:
                values = [int(c) for c in fields]
            except ValueError as exc:
                raise TraceError(f"{path}: line {lineno}: non-integer field ({exc})")
            job = Job(
                id=values[0],
                submit_time=values[1],
                runtime=values[2],
                walltime_estimate=values[3],
                request=tuple(values[4:]),
            )
            try:
                job.validate(capacities)
            except TraceError as exc:
                raise TraceError(f"{path}: line {lineno}: {exc}")
            jobs.append(job)
    if not header_seen:
        raise TraceError(f"{path}: missing header row")
    over = [j.id for j in jobs if any(r > c for r, c in zip(j.request, capacities))]
    if over:
        raise TraceError(
            f"{path}: jobs exceed resource capacity and were rejected: {over}"
        )
    return _sort_jobs(jobs)


def write_native_trace(path, jobs, resources: Sequence[ResourceSpec]):
    header = ["job_id", "submit_time", "runtime", "walltime_estimate"] + [
        r.name for r in resources
    ]
    lines = [",".join(header)]
    for j in _sort_jobs(jobs):
        row = [j.id, j.submit_time, j.runtime, j.walltime_estimate, *j.request]
        lines.append(",".join(str(v) for v in row))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


@dataclass
class ImportReport:
    imported: int = 0
    dropped: int = 0


def import_swf(path, scenario: ScenarioSpec, resources: Sequence[ResourceSpec],
               report: Optional[ImportReport] = None):
    """Import a Standard Workload Format log and synthesize extra resources.

    SWF fields used (1-based): 1 job id, 2 submit, 4 run time, 8 requested
    processors (field 5, allocated, as fallback), 9 requested time. Records
    with unknown (-1) runtime or processor count are dropped and counted.
    """
    if report is None:
        report = ImportReport()
    jobs = []
    with open(path, "r", encoding="utf-8") as f:
        for raw in f:
            line = raw.strip()
            if not line or line.startswith(";"):
                continue
            parts = line.split()
            if len(parts) < 9:
                report.dropped += 1
                continue
            try:
                jid = int(parts[0])
                submit = int(float(parts[1]))
                runtime = int(float(parts[3]))
                alloc_procs = int(float(parts[4]))
                req_procs = int(float(parts[7]))
                req_time = int(float(parts[8]))
            except ValueError:
                report.dropped += 1
                continue
            procs = req_procs if req_procs > 0 else alloc_procs
            if runtime <= 0 or procs <= 0:
                report.dropped += 1
                continue
            estimate = req_time if req_time > 0 else runtime
            request = [procs] + [0] * (len(resources) - 1)
            jobs.append(Job(id=jid, submit_time=submit, runtime=runtime,
                            walltime_estimate=estimate, request=tuple(request)))
            report.imported += 1
    if not jobs:
        raise TraceError(f"{path}: no usable SWF records")
    jobs = _sort_jobs(jobs)
    bb_capacity = resources[1].capacity_units if len(resources) > 1 else 0
    return apply_scenario(jobs, scenario, bb_capacity, scenario.seed)


def _log_uniform_int(rng, lo: int, hi: int) -> int:
    # Heavy right tail over several orders of magnitude of request sizes.
    if lo == hi:
        return lo
    v = math.exp(rng.uniform(math.log(max(lo, 1)), math.log(hi)))
    return int(min(max(round(v), lo), hi))


def apply_scenario(jobs, scenario: ScenarioSpec, bb_capacity: int, seed: int,
                   power_unit_w: int = 1000):
    """Transform a jobset's request vectors according to a contention scenario.

    Exactly round(bb_fraction * n) jobs receive a burst-buffer request drawn
    log-uniformly from bb_range_units (quota sampling, not per-job coin
    flips). Node requests are scaled by node_scale and rounded up to >= 1.
    When a power range is present, every job draws a per-node wattage and
    request[2] becomes ceil(nodes * watts / power_unit_w).

    Only request vectors change; runtimes and arrival order are untouched.
    """
    if scenario.bb_fraction > 0 and scenario.bb_range_units[1] > bb_capacity:
        raise TraceError(
            f"scenario bb range max {scenario.bb_range_units[1]} exceeds "
            f"burst-buffer capacity {bb_capacity}"
        )
    rng = np.random.default_rng(seed)
    n = len(jobs)
    quota = int(round(scenario.bb_fraction * n))
    bb_members = set(rng.choice(n, size=quota, replace=False).tolist()) if quota else set()
    out = []
    for idx, job in enumerate(jobs):
        nodes = max(1, math.ceil(job.request[0] * scenario.node_scale))
        bb = _log_uniform_int(rng, *scenario.bb_range_units) if idx in bb_members else 0
        request = [nodes, bb]
        if scenario.power_range_w is not None:
            watts = rng.uniform(*scenario.power_range_w)
            request.append(math.ceil(nodes * watts / power_unit_w))
        out.append(replace(job, request=tuple(request)))
    return out


def mean_interarrival(jobs) -> float:
    submits = sorted(j.submit_time for j in jobs)
    if len(submits) < 2 or submits[-1] == submits[0]:
        return 1.0
    return (submits[-1] - submits[0]) / (len(submits) - 1)


def sample_jobset(jobs, count: int, seed: int):
    """Resample jobs with replacement onto a Poisson arrival process.

    The process rate is 1 / (mean inter-arrival of the source). Output jobs
    are re-identified 1..count and sorted by submit time.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not jobs:
        raise ValueError("source jobset is empty")
    rng = np.random.default_rng(seed)
    scale = mean_interarrival(jobs)
    picks = rng.integers(0, len(jobs), size=count)
    gaps = rng.exponential(scale, size=count)
    t = 0.0
    out = []
    for i, pick in enumerate(picks):
        t += gaps[i]
        src = jobs[pick]
        out.append(replace(src, id=i + 1, submit_time=int(round(t)),
                           state=JobState.QUEUED, start_time=None, end_time=None))
    return _sort_reidentify(out)


def _sort_reidentify(jobs):
    out = _sort_jobs(jobs)
    return [replace(j, id=i + 1) for i, j in enumerate(out)]


@dataclass
class TraceProfile:
    """Empirical summary of a source trace used for synthetic generation."""

    arrival_rate_table: np.ndarray  # [7, 24] arrival counts by (day-of-week, hour)
    runtimes: np.ndarray
    estimate_ratios: np.ndarray  # walltime_estimate / runtime
    requests: list  # one value array per resource
    span_weeks: int

    @classmethod
    def from_jobs(cls, jobs):
        if len(jobs) < 100:
            raise ValueError("profile requires >= 100 source jobs")
        table = np.zeros((7, 24))
        submits = np.array([j.submit_time for j in jobs])
        for s in submits:
            day = (s // SECONDS_PER_DAY) % 7
            hour = (s // SECONDS_PER_HOUR) % 24
            table[int(day), int(hour)] += 1
        span = int(submits.max() - submits.min())
        n_res = len(jobs[0].request)
        return cls(
            arrival_rate_table=table,
            runtimes=np.array([j.runtime for j in jobs]),
            estimate_ratios=np.array(
                [j.walltime_estimate / j.runtime for j in jobs]
            ),
            requests=[np.array([j.request[r] for j in jobs]) for r in range(n_res)],
            span_weeks=max(1, math.ceil(span / SECONDS_PER_WEEK)),
        )


def synth_jobset(profile: TraceProfile, count: int, seed: int):
    """Generate synthetic jobs mimicking a source trace's patterns.

    Arrivals follow the 7x24 day/hour rate table; runtimes and per-resource
    requests are drawn independently from the profile's empirical
    distributions. Estimates reuse the empirical estimate/runtime ratio.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    weights = profile.arrival_rate_table.ravel()
    weights = weights / weights.sum()
    bins = rng.choice(weights.size, size=count, p=weights)
    weeks = rng.integers(0, profile.span_weeks, size=count)
    offsets = rng.uniform(0, SECONDS_PER_HOUR, size=count)
    out = []
    for i in range(count):
        day, hour = divmod(int(bins[i]), 24)
        submit = int(
            weeks[i] * SECONDS_PER_WEEK
            + day * SECONDS_PER_DAY
            + hour * SECONDS_PER_HOUR
            + offsets[i]
        )
        runtime = int(rng.choice(profile.runtimes))
        ratio = float(rng.choice(profile.estimate_ratios))
        request = tuple(int(rng.choice(vals)) for vals in profile.requests)
        out.append(Job(id=i + 1, submit_time=submit, runtime=runtime,
                       walltime_estimate=max(1, int(round(runtime * ratio))),
                       request=request))
    return _sort_reidentify(out)


def contended_jobset(count: int, seed: int, mean_gap: float = 450.0,
                     hog_fraction: float = 0.05, power: bool = False):
    """Desk-scale jobset with heavy burst-buffer contention.

    Poisson arrivals. Most jobs are small (4-16 nodes, 10-60 min log-uniform,
    75% requesting 2-30 of the 32 burst-buffer units); a hog_fraction of jobs
    need nearly the whole machine (60-64 nodes, 24-30 bb units, 2-4 h).
    Walltime estimates carry 1.5-3x multiplicative slack, so reservations for
    the big jobs force long conservative drain windows under plain
    first-come-first-served scheduling. With power=True each job additionally
    requests ceil(nodes x draw / 100 W) units of a 200-unit power pool, with
    per-node draw uniform in 100-215 W.
    """
    rng = np.random.default_rng(seed)
    out = []
    t = 0.0
    for i in range(count):
        t += rng.exponential(mean_gap)
        if rng.random() < hog_fraction:
            nodes = int(rng.integers(60, 65))
            runtime = int(rng.uniform(2 * 3600, 4 * 3600))
            bb = int(rng.integers(24, 31))
        else:
            nodes = int(rng.integers(4, 17))
            runtime = int(math.exp(rng.uniform(math.log(600), math.log(3600))))
            bb = _log_uniform_int(rng, 2, 30) if rng.random() < 0.75 else 0
        request = [nodes, bb]
        if power:
            request.append(math.ceil(nodes * rng.uniform(100, 215) / 100.0))
        est = int(runtime * rng.uniform(1.5, 3.0))
        out.append(Job(id=i + 1, submit_time=int(t), runtime=runtime,
                       walltime_estimate=est, request=tuple(request)))
    return out
