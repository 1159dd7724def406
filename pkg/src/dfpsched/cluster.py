"""Discrete-event simulation of a multi-resource HPC system.

Implements the scheduling-instance loop, single-job reservation at the
earliest simultaneous-fit time, and EASY backfilling. One simulation run is
single-threaded and owns its state; independent runs can go in parallel.
"""

import heapq
import time as _time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from dfpsched import _kernels
from dfpsched.workload import Job, JobState, ResourceSpec

# Sentinel returned by policies that decline to select a job.
PASS = None

_COMPLETION = 0
_ARRIVAL = 1


class SimulationInvariantError(Exception):
    """Internal consistency failure; indicates a simulator bug."""


class RejectedJobsError(Exception):
    def __init__(self, job_ids):
        self.job_ids = list(job_ids)
        super().__init__(f"jobs exceed system capacity: {self.job_ids}")


@dataclass
class SimulationResult:
    jobs: List[Job]
    series: List[tuple]  # (clock, used-units tuple), piecewise constant from clock on
    reservation_trace: List[tuple]  # (event_index, job_id, reservation_start)
    rejected: List[int]
    decisions: int
    decision_latencies: List[float]
    capacities: tuple


class ClusterState:
    def __init__(self, resources: Sequence[ResourceSpec], window: int = 10):
        self.resources = list(resources)
        self.capacities = tuple(r.capacity_units for r in resources)
        self.window = window
        self.clock = 0.0
        self.free = list(self.capacities)
        # job_id -> (units per resource, est_release, start_time); one shared
        # holder table since every running job holds units in every pool.
        self.holders = {}
        self.running = {}
        self.queue: List[Job] = []
        self.reserved: Optional[tuple] = None  # (Job, reservation_start)
        self.events = []  # heap of (time, kind, job_id)
        self.jobs_by_id = {}
        self.instance_id = 0
        self.event_index = 0

    # -- basic queries -------------------------------------------------------

    @property
    def n_resources(self):
        return len(self.capacities)

    def used(self):
        return tuple(c - f for c, f in zip(self.capacities, self.free))

    def window_jobs(self):
        return self.queue[: self.window]

    def fits_now(self, job: Job) -> bool:
        return all(r <= f for r, f in zip(job.request, self.free))

    def jobs_in_system(self):
        return len(self.running) + len(self.queue)

    # -- allocation ----------------------------------------------------------

    def _allocate(self, job: Job):
        for j, r in enumerate(job.request):
            if r > self.free[j]:
                raise SimulationInvariantError(
                    f"allocation of job {job.id} exceeds free units"
                )
            self.free[j] -= r
        est_release = self.clock + job.walltime_estimate
        self.holders[job.id] = (job.request, est_release, self.clock)

    def _release(self, job: Job):
        for j, r in enumerate(job.request):
            self.free[j] += r
        del self.holders[job.id]

    def earliest_fit_time(self, job: Job) -> float:
        """Smallest t >= clock at which job fits, assuming running jobs free
        their units at start + walltime_estimate (overdue holders are assumed
        to release immediately)."""
        releases = sorted(
            (max(est, self.clock), req) for req, est, _ in self.holders.values()
        )
        m = len(releases)
        times = np.array([t for t, _ in releases], dtype=np.float64)
        amounts = np.array([r for _, r in releases], dtype=np.int64).reshape(m, -1)
        if m and amounts.shape[1] != self.n_resources:
            raise SimulationInvariantError("holder request width mismatch")
        if m == 0:
            amounts = amounts.reshape(0, self.n_resources)
        return float(
            _kernels.earliest_fit(
                np.array(self.free, dtype=np.int64),
                np.array(job.request, dtype=np.int64),
                times,
                amounts,
                self.clock,
            )
        )


class Simulator:
    def __init__(self, resources, window=10, measure_latency=False):
        self.cluster = ClusterState(resources, window)
        self.series = []
        self.reservation_trace = []
        self.decision_latencies = []
        self.decisions = 0
        self.measure_latency = measure_latency

    # -- event machinery -----------------------------------------------------

    def _push(self, time, kind, job_id):
        heapq.heappush(self.cluster.events, (time, kind, job_id))

    def _record_series(self):
        self.series.append((self.cluster.clock, self.cluster.used()))

    def _check_conservation(self):
        c = self.cluster
        for j in range(c.n_resources):
            held = sum(job.request[j] for job in c.running.values())
            if held + c.free[j] != c.capacities[j]:
                raise SimulationInvariantError(
                    f"conservation violated for resource {j} at t={c.clock}"
                )

    def start_job(self, job: Job):
        c = self.cluster
        c._allocate(job)
        job.state = JobState.RUNNING
        job.start_time = int(c.clock)
        c.running[job.id] = job
        c.queue.remove(job)
        self._push(c.clock + job.runtime, _COMPLETION, job.id)
        self._record_series()

    def complete_job(self, job: Job):
        c = self.cluster
        if job.state is not JobState.RUNNING:
            raise SimulationInvariantError(f"double completion of job {job.id}")
        c._release(job)
        job.state = JobState.FINISHED
        job.end_time = int(c.clock)
        del c.running[job.id]
        self._record_series()

    # -- scheduling ----------------------------------------------------------

    def _select(self, policy, window):
        if self.measure_latency:
            t0 = _time.perf_counter()
            sel = policy.select(window, self.cluster)
            self.decision_latencies.append(_time.perf_counter() - t0)
        else:
            sel = policy.select(window, self.cluster)
        self.decisions += 1
        return sel

    def _set_reservation(self, job: Job):
        c = self.cluster
        r = c.earliest_fit_time(job)
        job.state = JobState.RESERVED
        c.reserved = (job, r)
        self.reservation_trace.append((c.event_index, job.id, r))

    def scheduling_instance(self, policy):
        """One scheduler invocation, triggered by an arrival or completion.

        Any pending reservation is cleared and the policy re-decides from
        scratch: each selection starts if it fits, and the first non-fitting
        selection becomes the (single) reservation, after which backfilling
        runs once and the instance ends.
        """
        c = self.cluster
        c.instance_id += 1
        started = []
        if c.reserved is not None:
            job, _ = c.reserved
            job.state = JobState.QUEUED
            c.reserved = None
        while True:
            window = c.window_jobs()
            if not window:
                break
            sel = self._select(policy, window)
            if sel is PASS:
                break
            if not isinstance(sel, int) or not 0 <= sel < len(window):
                break  # invalid slot, treated as Pass
            job = window[sel]
            if c.fits_now(job):
                self.start_job(job)
                started.append(job)
                continue
            self._set_reservation(job)
            started.extend(self.easy_backfill())
            return started
        started.extend(self.easy_backfill())
        return started

    def easy_backfill(self):
        """Start queued jobs that cannot delay the reserved job.

        A candidate that fits now is accepted if its estimated completion
        stays at or before the reservation start, or, failing that quick
        check, if re-deriving the reserved job's earliest fit with the
        candidate tentatively holding its units does not push the reservation
        later. Without a reservation this degenerates to starting any fitting
        job in arrival order.
        """
        c = self.cluster
        started = []
        if c.reserved is None:
            for job in list(c.queue):
                if c.fits_now(job):
                    self.start_job(job)
                    started.append(job)
            return started
        reserved_job, r = c.reserved
        for job in list(c.queue):
            if job.id == reserved_job.id or not c.fits_now(job):
                continue
            if c.clock + job.walltime_estimate <= r:
                self.start_job(job)
                started.append(job)
                continue
            # shadow check: would this start delay the reservation?
            c._allocate(job)
            shifted = c.earliest_fit_time(reserved_job)
            c._release(job)
            if shifted <= r:
                self.start_job(job)
                started.append(job)
        return started

    # -- driver --------------------------------------------------------------

    def run(self, jobs, policy) -> SimulationResult:
        c = self.cluster
        rejected = [
            j.id
            for j in jobs
            if any(r > cap for r, cap in zip(j.request, c.capacities))
        ]
        if rejected:
            raise RejectedJobsError(rejected)
        if hasattr(policy, "begin_episode"):
            policy.begin_episode(c)
        for job in jobs:
            c.jobs_by_id[job.id] = job
            self._push(float(job.submit_time), _ARRIVAL, job.id)
        while c.events:
            t, kind, job_id = heapq.heappop(c.events)
            c.clock = t
            c.event_index += 1
            job = c.jobs_by_id[job_id]
            if kind == _COMPLETION:
                self.complete_job(job)
            else:
                c.queue.append(job)
            self._check_conservation()
            self.scheduling_instance(policy)
        unfinished = [j.id for j in jobs if j.state is not JobState.FINISHED]
        if unfinished:
            raise SimulationInvariantError(f"jobs never finished: {unfinished}")
        if hasattr(policy, "end_episode"):
            policy.end_episode(c)
        return SimulationResult(
            jobs=list(jobs),
            series=self.series,
            reservation_trace=self.reservation_trace,
            rejected=[],
            decisions=self.decisions,
            decision_latencies=self.decision_latencies,
            capacities=c.capacities,
        )


def run_simulation(jobs, policy, resources, window=10,
                   measure_latency=False) -> SimulationResult:
    """Simulate a jobset to completion under a scheduling policy.

    Mutates the passed Job objects (state/start/end); callers wanting a pure
    view should pass copies. Deterministic for a fixed (jobs, policy,
    resources, window) tuple and a deterministic policy.
    """
    sim = Simulator(resources, window=window, measure_latency=measure_latency)
    return sim.run(list(jobs), policy)
