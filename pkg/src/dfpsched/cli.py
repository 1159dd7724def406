"""Command-line driver: synth, train, simulate, compare, validate-trace."""

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from dfpsched import baselines, dfp, metrics, workload
from dfpsched.cluster import run_simulation
from dfpsched.config import ConfigError, RunConfig
from dfpsched.nn import CheckpointError
from dfpsched.workload import (
    ScenarioSpec,
    TraceError,
    parse_native_trace,
    preset_scenario,
    write_native_trace,
)

log = logging.getLogger("dfpsched")

AGENT_POLICIES = ("mrsch", "fixed-goal")
POLICY_IDS = ("fcfs", "ga", "greedy", "greedy-fixed") + AGENT_POLICIES


class CliError(Exception):
    pass


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(text)
    os.replace(tmp, path)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def build_policy(config: RunConfig, policy_id, checkpoint=None):
    if policy_id == "fcfs":
        return baselines.FcfsPolicy()
    if policy_id == "ga":
        return baselines.GaPolicy(baselines.GaConfig(
            population=config.ga["population"],
            generations=config.ga["generations"],
            mutation_rate=config.ga["mutation_rate"],
            crossover_rate=config.ga["crossover_rate"],
            seed=config.seed,
        ))
    if policy_id == "greedy":
        return baselines.GreedyGoalPolicy("dynamic")
    if policy_id == "greedy-fixed":
        return baselines.GreedyGoalPolicy("fixed")
    if policy_id in AGENT_POLICIES:
        if checkpoint is None:
            raise CliError(f"policy '{policy_id}' requires --checkpoint")
        agent, _ = dfp.agent_from_checkpoint(
            checkpoint, expected_config_hash=config.config_hash(),
            seed=config.seed,
        )
        agent.epsilon = 0.0
        mode = "dynamic" if policy_id == "mrsch" else "fixed"
        return dfp.DfpPolicy(agent, goal_mode=mode, train=False)
    raise CliError(f"unknown policy '{policy_id}' (choose from {POLICY_IDS})")


def load_trace(path, config: RunConfig, scenario=None):
    path = str(path)
    if path.endswith(".swf"):
        if scenario is None:
            scenario = ScenarioSpec()
        return workload.import_swf(path, scenario, config.resources)
    return parse_native_trace(path, config.resources)


def simulate_once(config, jobs, policy_id, checkpoint=None,
                  measure_latency=False):
    policy = build_policy(config, policy_id, checkpoint)
    result = run_simulation(dfp.clone_jobs(jobs), policy, config.resources,
                            window=config.window,
                            measure_latency=measure_latency)
    return result, metrics.build_report(result)


def _write_run_outputs(out, config, result, report, policy_id):
    out = Path(out)
    names = [r.name for r in config.resources]
    atomic_write(out / "config.yaml", config.to_yaml())
    write_csv(out / "jobs.csv",
              ["job_id", "submit", "start", "end", "wait", "slowdown"],
              [
                  (j.id, j.submit_time, j.start_time, j.end_time,
                   j.start_time - j.submit_time,
                   (j.start_time - j.submit_time + j.runtime) / j.runtime)
                  for j in result.jobs
              ])
    write_csv(out / "series.csv", ["clock"] + [f"used_{n}" for n in names],
              [(t, *used) for t, used in result.series])
    write_csv(out / "report.csv",
              ["policy"] + [f"util_{n}" for n in names]
              + ["avg_wait", "avg_slowdown", "job_count", "makespan"],
              [(policy_id, *report.utilizations, report.avg_wait,
                report.avg_slowdown, report.job_count, report.makespan)])


# --- subcommands ------------------------------------------------------------


def _load_config(args) -> RunConfig:
    config = RunConfig.from_yaml(args.config)
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config


def cmd_validate_trace(args):
    config = RunConfig.from_yaml(args.config)
    jobs = load_trace(args.trace, config)
    print(f"trace ok: {len(jobs)} jobs")
    for i, r in enumerate(config.resources):
        reqs = np.array([j.request[i] for j in jobs])
        pcts = np.percentile(reqs, [50, 90, 100])
        print(f"  {r.name}: median {pcts[0]:g}, p90 {pcts[1]:g}, "
              f"max {pcts[2]:g} {r.unit_label}s")
    return 0


def _scenario_from_args(args, config):
    if args.scenario:
        bb_range = None
        if args.bb_range:
            lo, hi = (int(v) for v in args.bb_range.split(","))
            bb_range = (lo, hi)
        return preset_scenario(args.scenario, seed=config.seed,
                               bb_range_units=bb_range)
    kwargs = {"seed": config.seed}
    if args.bb_range:
        lo, hi = (int(v) for v in args.bb_range.split(","))
        kwargs["bb_range_units"] = (lo, hi)
    if args.bb_fraction is not None:
        kwargs["bb_fraction"] = args.bb_fraction
    if args.node_scale is not None:
        kwargs["node_scale"] = args.node_scale
    return ScenarioSpec(scenario_id="Custom", **kwargs)


def cmd_synth(args):
    config = _load_config(args)
    scenario = _scenario_from_args(args, config)
    if str(args.trace).endswith(".swf"):
        jobs = workload.import_swf(args.trace, scenario, config.resources)
    else:
        base = parse_native_trace(args.trace, config.resources)
        bb_cap = (config.resources[1].capacity_units
                  if len(config.resources) > 1 else 0)
        jobs = workload.apply_scenario(base, scenario, bb_cap, config.seed)
    over = [j.id for j in jobs
            if any(r > c for r, c in zip(j.request, config.capacities))]
    if over:
        raise TraceError(f"scenario produced over-capacity requests: {over}")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    tmp = str(args.out) + ".tmp"
    write_native_trace(tmp, jobs, config.resources)
    os.replace(tmp, args.out)
    with_bb = sum(1 for j in jobs if len(j.request) > 1 and j.request[1] > 0)
    print(f"wrote {len(jobs)} jobs to {args.out}")
    print(f"  scenario {scenario.scenario_id}, bb fraction achieved "
          f"{with_bb / len(jobs):.3f}")
    for i, r in enumerate(config.resources):
        reqs = np.array([j.request[i] for j in jobs])
        pcts = np.percentile(reqs, [50, 90, 100])
        print(f"  {r.name}: median {pcts[0]:g}, p90 {pcts[1]:g}, "
              f"max {pcts[2]:g}")
    return 0


def _load_phase_dir(path, config):
    files = sorted(Path(path).glob("*.csv"))
    if not files:
        raise CliError(f"no .csv jobsets in {path}")
    return [parse_native_trace(f, config.resources) for f in files]


def cmd_train(args):
    config = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobsets = {
        "sampled": _load_phase_dir(args.sampled_dir, config),
        "real": _load_phase_dir(args.real_dir, config),
        "synthetic": _load_phase_dir(args.synthetic_dir, config),
    }
    chash = config.config_hash()
    start_phase = 0
    if args.resume:
        agent, meta = dfp.agent_from_checkpoint(
            args.resume, expected_config_hash=chash, seed=config.seed)
        start_phase = len(meta.get("phases_completed", []))
        log.info("resuming after %d completed phase(s)", start_phase)
    else:
        agent = config.build_agent()
    goal_mode = "fixed" if args.fixed_goal else "dynamic"

    def progress(ep):
        log.info("phase=%s episode=%d steps=%d eps=%.4f mean_loss=%.5f",
                 ep["phase"], ep["episode"], ep["steps"], ep["epsilon"],
                 ep["mean_loss"])

    tlog = dfp.curriculum_train(
        agent, jobsets, config.resources, config.window,
        goal_mode=goal_mode, checkpoint_dir=out, config_hash=chash,
        start_phase=start_phase, episode_callback=progress,
    )
    atomic_write(out / "config.yaml", config.to_yaml())
    write_csv(out / "loss.csv", ["step", "loss"],
              list(enumerate(tlog.losses)))
    final = out / f"phase_{len(dfp.PHASE_ORDER) - 1}_synthetic.ckpt"
    print(f"training complete; final checkpoint {final}")
    return 0


def cmd_simulate(args):
    config = _load_config(args)
    policy_id = args.policy or config.policy
    jobs = load_trace(args.trace, config)
    result, report = simulate_once(config, jobs, policy_id,
                                   checkpoint=args.checkpoint,
                                   measure_latency=True)
    _write_run_outputs(args.out, config, result, report, policy_id)
    if result.decision_latencies:
        lat = np.array(result.decision_latencies)
        log.info("decision latency: mean %.2f ms, max %.2f ms over %d decisions",
                 1e3 * lat.mean(), 1e3 * lat.max(), lat.size)
    print(f"simulated {len(jobs)} jobs with {policy_id}: "
          f"avg wait {report.avg_wait:.1f} s, "
          f"avg slowdown {report.avg_slowdown:.2f}")
    return 0


def cmd_compare(args):
    config = _load_config(args)
    policies = args.policy
    if len(policies) < 2:
        raise CliError("compare needs at least two --policy values")
    jobs = load_trace(args.trace, config)
    if not jobs:
        raise CliError("trace is empty")
    names = [r.name for r in config.resources]
    reports = {}
    for pid in policies:
        _, report = simulate_once(config, jobs, pid,
                                  checkpoint=args.checkpoint)
        reports[pid] = report
    out = Path(args.out)
    atomic_write(out / "config.yaml", config.to_yaml())
    write_csv(out / "raw.csv",
              ["policy"] + [f"util_{n}" for n in names]
              + ["avg_wait", "avg_slowdown"],
              [(pid, *metrics.report_values(r)) for pid, r in reports.items()])
    table = metrics.normalize_for_comparison(reports)
    write_csv(out / "normalized.csv",
              ["policy"] + [f"util_{n}" for n in names]
              + ["recip_wait", "recip_slowdown"],
              [(pid, *row) for pid, row in table.items()])
    print(f"compared {policies} on {len(jobs)} jobs; tables in {out}")
    return 0


# --- entry point ------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(
        prog="dfpsched",
        description="Multi-resource HPC scheduling simulator and policies",
    )
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, trace=True, out=True):
        sp.add_argument("--config", required=True)
        if trace:
            sp.add_argument("--trace", required=True)
        sp.add_argument("--seed", type=int, default=None)
        if out:
            sp.add_argument("--out", required=True)

    sp = sub.add_parser("validate-trace", help="parse and summarize a trace")
    sp.add_argument("--config", required=True)
    sp.add_argument("--trace", required=True)
    sp.set_defaults(func=cmd_validate_trace)

    sp = sub.add_parser("synth", help="apply a contention scenario to a trace")
    common(sp)
    sp.add_argument("--scenario", help="preset S1..S10; omit for Custom")
    sp.add_argument("--bb-range", help="min,max burst-buffer units")
    sp.add_argument("--bb-fraction", type=float)
    sp.add_argument("--node-scale", type=float)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="three-phase curriculum training")
    common(sp, trace=False)
    sp.add_argument("--sampled-dir", required=True)
    sp.add_argument("--real-dir", required=True)
    sp.add_argument("--synthetic-dir", required=True)
    sp.add_argument("--resume", help="phase checkpoint to continue from")
    sp.add_argument("--fixed-goal", action="store_true",
                    help="train the frozen-goal ablation")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("simulate", help="run one policy on a trace")
    common(sp)
    sp.add_argument("--policy", choices=POLICY_IDS)
    sp.add_argument("--checkpoint")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", help="run several policies, emit tables")
    common(sp)
    sp.add_argument("--policy", action="append", default=[],
                    choices=POLICY_IDS)
    sp.add_argument("--checkpoint")
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (CliError, ConfigError, TraceError, CheckpointError,
            FileNotFoundError) as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
