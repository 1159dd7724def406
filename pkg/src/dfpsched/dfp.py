"""Goal-conditioned future-prediction scheduling agent.

Encodes window jobs and per-unit resource availability into a flat state
vector, computes contention-driven goal weights, predicts future utilization
changes per candidate job with a dueling network, and trains on replayed
experience through a three-phase curriculum (sampled, real, synthetic
jobsets).
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from dfpsched import nn
from dfpsched.cluster import PASS, ClusterState, run_simulation
from dfpsched.metrics import instantaneous_measurement
from dfpsched.workload import Job, JobState

log = logging.getLogger(__name__)

TIME_NORMALIZER = 86400.0  # seconds; normalized times are clipped to [0, 3]
TIME_CLIP = 3.0

DEFAULT_OFFSETS = (1, 2, 4, 8, 16, 32)
DEFAULT_TEMPORAL_WEIGHTS = (0.0, 0.0, 0.0, 0.5, 0.5, 1.0)


class TrainingDiverged(Exception):
    pass


def state_vector_length(window: int, capacities: Sequence[int]) -> int:
    return (len(capacities) + 2) * window + 2 * sum(capacities)


def _norm_time(seconds, normalizer=TIME_NORMALIZER):
    return min(max(seconds, 0.0) / normalizer, TIME_CLIP)


def encode_state(cluster: ClusterState, window_jobs,
                 normalizer=TIME_NORMALIZER) -> np.ndarray:
    """Flat state vector: W job blocks then per-unit blocks per resource.

    Job block i = (request fractions per resource, normalized estimate,
    normalized queued time); empty slots stay zero. Unit block = (free bit,
    normalized time-to-available, 0 when free). Held units are listed per
    holder ordered by (start time, job id), free units last.
    """
    w = cluster.window
    if len(window_jobs) > w:
        raise ValueError(f"window has {len(window_jobs)} jobs, limit {w}")
    caps = cluster.capacities
    n_res = len(caps)
    vec = np.zeros(state_vector_length(w, caps), dtype=np.float64)
    for i, job in enumerate(window_jobs):
        base = i * (n_res + 2)
        for j in range(n_res):
            vec[base + j] = job.request[j] / caps[j]
        vec[base + n_res] = _norm_time(job.walltime_estimate, normalizer)
        vec[base + n_res + 1] = _norm_time(cluster.clock - job.submit_time,
                                           normalizer)
    pos = w * (n_res + 2)
    holders = sorted(cluster.holders.items(),
                     key=lambda kv: (kv[1][2], kv[0]))  # (start_time, job id)
    for j in range(n_res):
        for _, (request, est_release, _) in holders:
            tta = _norm_time(est_release - cluster.clock, normalizer)
            for _ in range(request[j]):
                vec[pos] = 0.0
                vec[pos + 1] = tta
                pos += 2
        for _ in range(cluster.free[j]):
            vec[pos] = 1.0
            vec[pos + 1] = 0.0
            pos += 2
    return vec


def compute_goal(running, queued, capacities, clock=0.0) -> np.ndarray:
    """Per-resource contention weights, normalized to sum to 1.

    Weight j is proportional to the total (request fraction x remaining
    estimate) over all running and queued jobs; an empty or all-zero system
    falls back to uniform weights.
    """
    n_res = len(capacities)
    numerators = np.zeros(n_res, dtype=np.float64)
    for job in running:
        t = max(0.0, job.start_time + job.walltime_estimate - clock)
        for j in range(n_res):
            numerators[j] += (job.request[j] / capacities[j]) * t
    for job in queued:
        for j in range(n_res):
            numerators[j] += (job.request[j] / capacities[j]) * job.walltime_estimate
    total = numerators.sum()
    if total <= 0:
        return np.full(n_res, 1.0 / n_res)
    return numerators / total


def goal_from_cluster(cluster: ClusterState) -> np.ndarray:
    return compute_goal(cluster.running.values(), cluster.queue,
                        cluster.capacities, cluster.clock)


@dataclass
class Experience:
    state: np.ndarray
    measurement: np.ndarray
    goal: np.ndarray
    action: int
    future_targets: np.ndarray  # [n_offsets, R] measurement changes
    target_mask: np.ndarray  # bool per offset


class DfpAgent:
    """Wraps the dueling network with action scoring and replay training."""

    def __init__(self, network: nn.DfpNetwork,
                 offsets=DEFAULT_OFFSETS,
                 temporal_weights=DEFAULT_TEMPORAL_WEIGHTS,
                 learning_rate=1e-4, batch_size=64, replay_size=20000,
                 epsilon=1.0, epsilon_decay=0.995, seed=0):
        if len(offsets) != network.n_offsets:
            raise ValueError("offsets length does not match network")
        if len(temporal_weights) != len(offsets):
            raise ValueError("temporal_weights length does not match offsets")
        self.net = network
        self.offsets = tuple(int(o) for o in offsets)
        self.temporal_weights = np.array(temporal_weights, dtype=np.float64)
        self.optimizer = nn.Adam(network.params(), lr=learning_rate)
        self.batch_size = batch_size
        self.replay = deque(maxlen=replay_size)
        self.epsilon = epsilon
        self.epsilon_decay = epsilon_decay
        self.rng = np.random.default_rng(seed)

    @property
    def window(self):
        return self.net.window

    def predict(self, state, measurement, goal) -> np.ndarray:
        """Prediction tensor [window, n_offsets, R] for one decision."""
        pred, _ = self.net.forward(state[None, :], measurement[None, :],
                                   goal[None, :])
        return pred[0].astype(np.float64)

    def action_scores(self, prediction, goal) -> np.ndarray:
        # score(a) = sum_tau w_tau * sum_j goal_j * pred[a, tau, j]
        return np.einsum("atj,t,j->a", prediction, self.temporal_weights, goal)

    def select_action(self, prediction, goal, valid_mask, mode="eval"):
        """Best-scoring valid window slot; ties break to the lowest index.

        Train mode explores uniformly over valid slots with probability
        epsilon. Returns PASS when no slot is valid.
        """
        valid = np.asarray(valid_mask, dtype=bool)
        if not valid.any():
            return PASS
        if mode == "train" and self.rng.random() < self.epsilon:
            return int(self.rng.choice(np.flatnonzero(valid)))
        scores = self.action_scores(prediction, goal)
        scores = np.where(valid, scores, -np.inf)
        return int(np.argmax(scores))

    def record_and_label(self, trace) -> List[Experience]:
        """Turn an episode trace of (state, measurement, goal, action) into
        experiences with future measurement-change targets; horizons past the
        episode end are masked out."""
        n = len(trace)
        out = []
        for t, (state, meas, goal, action) in enumerate(trace):
            targets = np.zeros((len(self.offsets), len(meas)))
            mask = np.zeros(len(self.offsets), dtype=bool)
            for tau, off in enumerate(self.offsets):
                if t + off < n:
                    targets[tau] = trace[t + off][1] - meas
                    mask[tau] = True
            out.append(Experience(state=state, measurement=meas, goal=goal,
                                  action=action, future_targets=targets,
                                  target_mask=mask))
        return out

    def train_step(self, batch: List[Experience]) -> float:
        """One masked-MSE gradient step on the taken-action slices."""
        if not batch:
            raise ValueError("empty batch")
        b = len(batch)
        states = np.stack([e.state for e in batch])
        meas = np.stack([e.measurement for e in batch])
        goals = np.stack([e.goal for e in batch])
        actions = np.array([e.action for e in batch])
        targets = np.stack([e.future_targets for e in batch])
        masks = np.stack([e.target_mask for e in batch])
        pred, cache = self.net.forward(states, meas, goals)
        taken = pred[np.arange(b), actions]  # [B, n_offsets, R]
        loss, dtaken = nn.mse_loss(taken, targets, masks[:, :, None])
        if not np.isfinite(loss):
            log.warning("non-finite loss, step skipped")
            self.optimizer.skipped += 1
            return float(loss)
        dpred = np.zeros_like(pred)
        dpred[np.arange(b), actions] = dtaken
        grads = self.net.backward(cache, dpred)
        self.optimizer.step(self.net.params(), grads)
        return loss

    def sample_batch(self):
        idx = self.rng.integers(0, len(self.replay), size=self.batch_size)
        return [self.replay[i] for i in idx]


class DfpPolicy:
    """SchedulingPolicy adapter around a DfpAgent.

    goal_mode 'dynamic' recomputes contention weights each decision;
    'fixed' feeds the constant uniform goal (the frozen-goal ablation).
    """

    def __init__(self, agent: DfpAgent, goal_mode="dynamic", train=False):
        if goal_mode not in ("dynamic", "fixed"):
            raise ValueError(f"unknown goal_mode {goal_mode}")
        self.agent = agent
        self.goal_mode = goal_mode
        self.train = train
        self.trace = []

    def begin_episode(self, cluster):
        self.trace = []

    def goal_for(self, cluster) -> np.ndarray:
        if self.goal_mode == "fixed":
            n = cluster.n_resources
            return np.full(n, 1.0 / n)
        return goal_from_cluster(cluster)

    def select(self, window, cluster):
        state = encode_state(cluster, window)
        meas = instantaneous_measurement(cluster)
        goal = self.goal_for(cluster)
        pred = self.agent.predict(state, meas, goal)
        valid = np.zeros(self.agent.window, dtype=bool)
        valid[: len(window)] = True
        mode = "train" if self.train else "eval"
        action = self.agent.select_action(pred, goal, valid, mode=mode)
        if action is PASS:
            return PASS
        if self.train:
            self.trace.append((state, meas, goal, action))
        return action


def clone_jobs(jobs):
    return [
        Job(id=j.id, submit_time=j.submit_time, runtime=j.runtime,
            walltime_estimate=j.walltime_estimate, request=j.request,
            state=JobState.QUEUED)
        for j in jobs
    ]


@dataclass
class TrainingLog:
    losses: List[float] = field(default_factory=list)
    episodes: List[dict] = field(default_factory=list)
    phases_completed: List[str] = field(default_factory=list)


PHASE_ORDER = ("sampled", "real", "synthetic")

DIVERGENCE_LOSS = 1e3
DIVERGENCE_STEPS = 1000


def run_training_episode(agent, jobs, resources, window, goal_mode="dynamic"):
    """Simulate one jobset with an exploring agent and absorb the experience.

    Appends the labeled episode to the replay memory and runs one training
    step per decision taken (1:1 interleave, batched per episode)."""
    policy = DfpPolicy(agent, goal_mode=goal_mode, train=True)
    run_simulation(clone_jobs(jobs), policy, resources, window=window)
    experiences = agent.record_and_label(policy.trace)
    agent.replay.extend(experiences)
    losses = []
    if len(agent.replay) >= agent.batch_size:
        for _ in range(len(experiences)):
            losses.append(agent.train_step(agent.sample_batch()))
    agent.epsilon *= agent.epsilon_decay
    return losses


def curriculum_train(agent: DfpAgent, jobsets: dict, resources, window,
                     goal_mode="dynamic", checkpoint_dir=None,
                     config_hash="", start_phase=0,
                     episode_callback=None) -> TrainingLog:
    """Three-phase curriculum: sampled, then real, then synthetic jobsets.

    jobsets maps each phase name to a list of jobsets (lists of Jobs).
    Epsilon decays geometrically per episode. Aborts when the loss stays
    above the divergence threshold for too many consecutive steps. A
    checkpoint is written after each phase when checkpoint_dir is given.
    """
    log_out = TrainingLog()
    high_loss_streak = 0
    for phase_idx, phase in enumerate(PHASE_ORDER):
        if phase_idx < start_phase:
            log_out.phases_completed.append(phase)
            continue
        phase_sets = jobsets.get(phase, [])
        if not phase_sets:
            raise ValueError(f"no jobsets for phase '{phase}'")
        for ep_idx, jobs in enumerate(phase_sets):
            losses = run_training_episode(agent, jobs, resources, window,
                                          goal_mode=goal_mode)
            for loss in losses:
                log_out.losses.append(loss)
                if loss > DIVERGENCE_LOSS:
                    high_loss_streak += 1
                    if high_loss_streak >= DIVERGENCE_STEPS:
                        raise TrainingDiverged(
                            f"loss above {DIVERGENCE_LOSS} for "
                            f"{DIVERGENCE_STEPS} consecutive steps in phase "
                            f"'{phase}'"
                        )
                else:
                    high_loss_streak = 0
            log_out.episodes.append({
                "phase": phase, "episode": ep_idx, "steps": len(losses),
                "epsilon": agent.epsilon,
                "mean_loss": float(np.mean(losses)) if losses else float("nan"),
            })
            if episode_callback is not None:
                episode_callback(log_out.episodes[-1])
        log_out.phases_completed.append(phase)
        if checkpoint_dir is not None:
            path = Path(checkpoint_dir) / f"phase_{phase_idx}_{phase}.ckpt"
            nn.save_checkpoint(agent.net, agent.optimizer, {
                "config_hash": config_hash,
                "phase": phase,
                "phases_completed": list(log_out.phases_completed),
                "epsilon": agent.epsilon,
                "goal_mode": goal_mode,
                "offsets": list(agent.offsets),
                "temporal_weights": self_weights_list(agent),
            }, path)
    return log_out


def self_weights_list(agent):
    return [float(w) for w in agent.temporal_weights]


def agent_from_checkpoint(path, expected_config_hash=None, seed=0,
                          learning_rate=1e-4, batch_size=64,
                          replay_size=20000, epsilon_decay=0.995):
    net, arrays, meta = nn.load_checkpoint(path, expected_config_hash)
    agent = DfpAgent(
        net,
        offsets=tuple(meta.get("offsets", DEFAULT_OFFSETS)),
        temporal_weights=tuple(
            meta.get("temporal_weights", DEFAULT_TEMPORAL_WEIGHTS)
        ),
        learning_rate=learning_rate, batch_size=batch_size,
        replay_size=replay_size, epsilon=meta.get("epsilon", 0.0),
        epsilon_decay=epsilon_decay, seed=seed,
    )
    if "opt.t" in arrays:
        agent.optimizer.load_state(arrays)
    return agent, meta
