import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dfpsched.workload import Job, ResourceSpec  # noqa: E402


@pytest.fixture
def two_resources():
    return [ResourceSpec("nodes", 4, "node"), ResourceSpec("bb", 4, "TB")]


def random_jobs(rng, count, capacities, max_runtime=200, arrival_span=300,
                over_estimate=60, allow_zero=True):
    """Small random instances with estimates >= runtimes."""
    jobs = []
    for i in range(count):
        req = []
        for cap in capacities:
            lo = 0 if allow_zero and len(req) > 0 else 1
            req.append(int(rng.integers(lo, cap + 1)))
        runtime = int(rng.integers(1, max_runtime))
        jobs.append(Job(
            id=i + 1,
            submit_time=int(rng.integers(0, arrival_span)),
            runtime=runtime,
            walltime_estimate=runtime + int(rng.integers(0, over_estimate)),
            request=tuple(req),
        ))
    return sorted(jobs, key=lambda j: (j.submit_time, j.id))
