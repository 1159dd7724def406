"""Comparison scheduling policies behind the common select() interface."""

from dataclasses import dataclass

import numpy as np

from dfpsched import _kernels
from dfpsched.cluster import PASS
from dfpsched.dfp import DfpPolicy, goal_from_cluster


class FcfsPolicy:
    """Arrival order: always the head of the window. Stateless."""

    name = "fcfs"

    def select(self, window, cluster):
        return 0 if window else PASS


class GreedyGoalPolicy:
    """Immediate scorer: goal-weighted utilization gain of starting each job.

    Picks the best-scoring job that fits right now; when nothing fits, the
    oldest window job is returned so it becomes the reservation. goal_mode
    'dynamic' uses the contention weights, 'fixed' a uniform goal.
    """

    def __init__(self, goal_mode="dynamic"):
        self.goal_mode = goal_mode
        self.name = "greedy" if goal_mode == "dynamic" else "greedy-fixed"

    def select(self, window, cluster):
        if not window:
            return PASS
        caps = np.array(cluster.capacities, dtype=np.float64)
        if self.goal_mode == "fixed":
            goal = np.full(len(caps), 1.0 / len(caps))
        else:
            goal = goal_from_cluster(cluster)
        best, best_score = None, -np.inf
        for i, job in enumerate(window):
            if not cluster.fits_now(job):
                continue
            score = float(goal @ (np.array(job.request) / caps))
            if score > best_score:
                best, best_score = i, score
        return best if best is not None else 0


@dataclass(frozen=True)
class GaConfig:
    population: int = 32
    generations: int = 50
    mutation_rate: float = 0.1
    crossover_rate: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        for r in (self.mutation_rate, self.crossover_rate):
            if not 0.0 <= r <= 1.0:
                raise ValueError("rates must be in [0, 1]")


def _nondominated_sort(objs):
    """Fast non-dominated sort for maximization. Returns list of fronts
    (lists of indices) and per-individual rank."""
    n = len(objs)
    dominates = [[] for _ in range(n)]
    dominated_count = [0] * n
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            if np.all(objs[a] >= objs[b]) and np.any(objs[a] > objs[b]):
                dominates[a].append(b)
            elif np.all(objs[b] >= objs[a]) and np.any(objs[b] > objs[a]):
                dominated_count[a] += 1
    fronts = [[i for i in range(n) if dominated_count[i] == 0]]
    rank = [0] * n
    while fronts[-1]:
        nxt = []
        for a in fronts[-1]:
            for b in dominates[a]:
                dominated_count[b] -= 1
                if dominated_count[b] == 0:
                    rank[b] = len(fronts)
                    nxt.append(b)
        fronts.append(nxt)
    fronts.pop()
    return fronts, rank


def _crowding(objs, front):
    dist = {i: 0.0 for i in front}
    if len(front) <= 2:
        return {i: np.inf for i in front}
    arr = np.array([objs[i] for i in front])
    for j in range(arr.shape[1]):
        order = np.argsort(arr[:, j], kind="stable")
        span = arr[order[-1], j] - arr[order[0], j]
        dist[front[order[0]]] = np.inf
        dist[front[order[-1]]] = np.inf
        if span <= 0:
            continue
        for k in range(1, len(order) - 1):
            dist[front[order[k]]] += (
                arr[order[k + 1], j] - arr[order[k - 1], j]
            ) / span
    return dist


def _order_crossover(p1, p2, rng):
    n = len(p1)
    a, b = sorted(rng.integers(0, n, size=2))
    child = -np.ones(n, dtype=np.int64)
    child[a:b + 1] = p1[a:b + 1]
    fill = [g for g in p2 if g not in set(child[a:b + 1].tolist())]
    pos = 0
    for i in range(n):
        if child[i] < 0:
            child[i] = fill[pos]
            pos += 1
    return child


class GaPolicy:
    """Multi-objective permutation GA over the window.

    A chromosome orders the window; decoding greedily places jobs onto the
    current free resources, skipping non-fitters, and the objectives are the
    resulting per-resource utilizations. Selection is non-dominated sorting
    with crowding distance; the knee solution (maximum sum of front-
    normalized objectives) wins. Within one scheduling instance subsequent
    calls replay the cached placement order.
    """

    name = "ga"

    def __init__(self, config: GaConfig = GaConfig()):
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self._cache_instance = None
        self._cache_order = []

    # -- decoding ------------------------------------------------------------

    def _decode(self, requests, free, caps, used, perm):
        placed, _ = _kernels.greedy_placement(requests, free, perm)
        gain = requests[placed].sum(axis=0) if placed.any() else np.zeros_like(free)
        objs = (used + gain) / caps
        return placed, objs

    def _evolve(self, requests, free, caps, used):
        cfg = self.config
        n = requests.shape[0]
        pop = [np.arange(n, dtype=np.int64)]
        while len(pop) < cfg.population:
            pop.append(self.rng.permutation(n).astype(np.int64))
        evals = [self._decode(requests, free, caps, used, p) for p in pop]
        objs = [e[1] for e in evals]
        for _ in range(cfg.generations):
            fronts, rank = _nondominated_sort(objs)
            crowd = {}
            for front in fronts:
                crowd.update(_crowding(objs, front))

            def tournament():
                a, b = self.rng.integers(0, len(pop), size=2)
                if rank[a] != rank[b]:
                    return pop[a] if rank[a] < rank[b] else pop[b]
                return pop[a] if crowd[a] >= crowd[b] else pop[b]

            offspring = []
            while len(offspring) < cfg.population:
                p1, p2 = tournament(), tournament()
                if n > 1 and self.rng.random() < cfg.crossover_rate:
                    child = _order_crossover(p1, p2, self.rng)
                else:
                    child = p1.copy()
                if n > 1 and self.rng.random() < cfg.mutation_rate:
                    i, j = self.rng.integers(0, n, size=2)
                    child[i], child[j] = child[j], child[i]
                offspring.append(child)
            pop = pop + offspring
            objs = objs + [
                self._decode(requests, free, caps, used, p)[1] for p in offspring
            ]
            fronts, rank = _nondominated_sort(objs)
            keep = []
            for front in fronts:
                if len(keep) + len(front) <= cfg.population:
                    keep.extend(front)
                else:
                    crowd = _crowding(objs, front)
                    ordered = sorted(front, key=lambda i: -crowd[i])
                    keep.extend(ordered[: cfg.population - len(keep)])
                    break
            pop = [pop[i] for i in keep]
            objs = [objs[i] for i in keep]
        fronts, _ = _nondominated_sort(objs)
        front = fronts[0]
        arr = np.array([objs[i] for i in front])
        peaks = arr.max(axis=0)
        peaks[peaks <= 0] = 1.0
        knee = front[int(np.argmax((arr / peaks).sum(axis=1)))]
        return pop[knee], objs[knee]

    # -- policy interface ----------------------------------------------------

    def select(self, window, cluster):
        if not window:
            return PASS
        if (
            self._cache_instance == cluster.instance_id
            and self._cache_order
        ):
            ids = {j.id: i for i, j in enumerate(window)}
            while self._cache_order:
                jid = self._cache_order.pop(0)
                if jid in ids:
                    return ids[jid]
            # cache exhausted; fall through to a fresh optimization
        requests = np.array([j.request for j in window], dtype=np.int64)
        free = np.array(cluster.free, dtype=np.int64)
        caps = np.array(cluster.capacities, dtype=np.float64)
        used = caps - free
        if len(window) == 1:
            best, placed = np.array([0], dtype=np.int64), None
        else:
            best, _ = self._evolve(requests, free, caps, used)
        placed, _ = self._decode(requests, free, caps, used, best)
        order = [window[i].id for i in best if placed[i]]
        self._cache_instance = cluster.instance_id
        if not order:
            self._cache_order = []
            return 0  # nothing placeable; reserve the oldest window job
        self._cache_order = order[1:]
        return int(np.flatnonzero([window[i].id == order[0] for i in range(len(window))])[0])


def fixed_goal_policy(agent):
    """Frozen-goal ablation: identical mechanics, constant uniform goal."""
    return DfpPolicy(agent, goal_mode="fixed", train=False)
