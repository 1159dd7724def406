"""NumPy fallbacks for the compiled scheduling kernels."""

import numpy as np

BACKEND = "numpy"


def greedy_placement(requests, free, order):
    """Place jobs greedily in `order` onto the free-resource vector.

    requests: int64 [n, R]; free: int64 [R]; order: int64 permutation of n.
    Returns (placed bool[n], free_after int64[R]).
    """
    free = free.copy()
    placed = np.zeros(requests.shape[0], dtype=bool)
    for idx in order:
        req = requests[idx]
        if np.all(req <= free):
            free -= req
            placed[idx] = True
    return placed, free


def earliest_fit(free, req, release_times, release_amounts, clock):
    """Earliest time t >= clock at which req fits, given sorted future releases.

    release_times: float64 [m] nondecreasing; release_amounts: int64 [m, R]
    units returned at each release. Returns clock when it already fits.
    """
    avail = free.copy()
    if np.all(req <= avail):
        return float(clock)
    for i in range(release_times.shape[0]):
        avail += release_amounts[i]
        t = release_times[i]
        # consume any co-timed releases before testing
        if i + 1 < release_times.shape[0] and release_times[i + 1] == t:
            continue
        if np.all(req <= avail):
            return float(max(t, clock))
    raise RuntimeError("insufficient capacity even after all releases")
