"""Train the shipped evaluation checkpoints in artifacts/.

Trains three agents against the contended synthetic workload family:

    artifacts/desk_agent.ckpt        desk system, dynamic goals
    artifacts/desk_fixed_agent.ckpt  desk system, goals frozen at uniform
    artifacts/power_agent.ckpt       desk system plus 200-unit power pool

The desk system is 64 nodes / 32 burst-buffer units. The frozen-goal agent
is the comparison baseline for the dynamic-goal agent; it trains with the
goal input pinned to (1/R, ..., 1/R) instead of the contention-derived
weights. Deterministic for a fixed config pair; takes roughly an hour on a
laptop.
"""

import time
from pathlib import Path

from dfpsched.config import RunConfig
from dfpsched.dfp import run_training_episode
from dfpsched.nn import save_checkpoint
from dfpsched.workload import contended_jobset

ROOT = Path(__file__).resolve().parent.parent
EPISODES = 200
TRAIN_SETS = 20
JOBS_PER_SET = 500


def train(config_path, power, goal_mode, out_path):
    config = RunConfig.from_yaml(config_path)
    resources = config.resources
    agent = config.build_agent()
    jobsets = [contended_jobset(JOBS_PER_SET, 1000 + s, power=power)
               for s in range(TRAIN_SETS)]
    t0 = time.time()
    for ep in range(EPISODES):
        run_training_episode(agent, jobsets[ep % len(jobsets)], resources,
                             window=config.window, goal_mode=goal_mode)
        if (ep + 1) % 50 == 0:
            print(f"{out_path.name}: episode {ep + 1}/{EPISODES} "
                  f"({time.time() - t0:.0f}s, epsilon {agent.epsilon:.3f})",
                  flush=True)
    save_checkpoint(agent.net, agent.optimizer, {
        "config_hash": config.config_hash(),
        "phase": "contended-%d-episodes" % EPISODES,
        "epsilon": 0.0,
        "goal_mode": goal_mode,
        "offsets": list(agent.offsets),
        "temporal_weights": [float(w) for w in agent.temporal_weights],
    }, out_path)
    print(f"wrote {out_path}")


def main():
    out_dir = ROOT / "artifacts"
    out_dir.mkdir(exist_ok=True)
    desk = ROOT / "configs" / "desk.yaml"
    train(desk, False, "dynamic", out_dir / "desk_agent.ckpt")
    train(desk, False, "fixed", out_dir / "desk_fixed_agent.ckpt")
    train(ROOT / "configs" / "desk_power.yaml", True, "dynamic",
          out_dir / "power_agent.ckpt")


if __name__ == "__main__":
    main()
