"""Run configuration: YAML loading, validation, hashing, agent construction."""

import hashlib
import json
from dataclasses import dataclass, field
from typing import List, Optional

import yaml

from dfpsched import nn
from dfpsched.dfp import (
    DEFAULT_OFFSETS,
    DEFAULT_TEMPORAL_WEIGHTS,
    DfpAgent,
    state_vector_length,
)
from dfpsched.workload import ResourceSpec


class ConfigError(Exception):
    pass


AGENT_DEFAULTS = {
    "offsets": list(DEFAULT_OFFSETS),
    "temporal_weights": list(DEFAULT_TEMPORAL_WEIGHTS),
    "epsilon": 1.0,
    "epsilon_decay": 0.995,
    "replay_size": 20000,
    "learning_rate": 1e-4,
    "batch_size": 64,
    "state_hidden": [4000, 1000],
    "state_out": 512,
    "head_hidden": [128, 128],
    "head_out": 128,
    "stream_hidden": [256],
}

GA_DEFAULTS = {
    "population": 32,
    "generations": 50,
    "mutation_rate": 0.1,
    "crossover_rate": 0.8,
}


@dataclass
class RunConfig:
    resources: List[ResourceSpec]
    window: int = 10
    seed: int = 0
    policy: str = "fcfs"
    agent: dict = field(default_factory=dict)
    ga: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if not self.resources:
            raise ConfigError("at least one resource is required")
        names = [r.name for r in self.resources]
        if len(set(names)) != len(names):
            raise ConfigError("resource names must be unique")
        self.agent = {**AGENT_DEFAULTS, **self.agent}
        self.ga = {**GA_DEFAULTS, **self.ga}
        if len(self.agent["offsets"]) != len(self.agent["temporal_weights"]):
            raise ConfigError("offsets and temporal_weights lengths differ")

    @property
    def capacities(self):
        return tuple(r.capacity_units for r in self.resources)

    @classmethod
    def from_yaml(cls, path):
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
        if not isinstance(raw, dict) or "resources" not in raw:
            raise ConfigError(f"{path}: missing 'resources' section")
        resources = [
            ResourceSpec(
                name=r["name"],
                capacity_units=int(r["capacity_units"]),
                unit_label=r.get("unit_label", "unit"),
            )
            for r in raw["resources"]
        ]
        return cls(
            resources=resources,
            window=int(raw.get("window", 10)),
            seed=int(raw.get("seed", 0)),
            policy=str(raw.get("policy", "fcfs")),
            agent=dict(raw.get("agent", {})),
            ga=dict(raw.get("ga", {})),
        )

    def to_dict(self):
        return {
            "resources": [
                {"name": r.name, "capacity_units": r.capacity_units,
                 "unit_label": r.unit_label}
                for r in self.resources
            ],
            "window": self.window,
            "seed": self.seed,
            "policy": self.policy,
            "agent": self.agent,
            "ga": self.ga,
        }

    def to_yaml(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def config_hash(self) -> str:
        """Hash of everything a checkpoint must agree on: resources, window,
        and the agent architecture/horizon settings."""
        relevant = {
            "resources": [
                {"name": r.name, "capacity_units": r.capacity_units}
                for r in self.resources
            ],
            "window": self.window,
            "agent": {
                k: self.agent[k]
                for k in ("offsets", "state_hidden", "state_out",
                          "head_hidden", "head_out", "stream_hidden")
            },
        }
        blob = json.dumps(relevant, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def build_agent(self, seed: Optional[int] = None) -> DfpAgent:
        a = self.agent
        net = nn.DfpNetwork(
            state_dim=state_vector_length(self.window, self.capacities),
            n_resources=len(self.resources),
            window=self.window,
            n_offsets=len(a["offsets"]),
            state_hidden=tuple(a["state_hidden"]),
            state_out=a["state_out"],
            head_hidden=tuple(a["head_hidden"]),
            head_out=a["head_out"],
            stream_hidden=tuple(a["stream_hidden"]),
            seed=self.seed if seed is None else seed,
        )
        return DfpAgent(
            net,
            offsets=tuple(a["offsets"]),
            temporal_weights=tuple(a["temporal_weights"]),
            learning_rate=a["learning_rate"],
            batch_size=a["batch_size"],
            replay_size=a["replay_size"],
            epsilon=a["epsilon"],
            epsilon_decay=a["epsilon_decay"],
            seed=self.seed if seed is None else seed,
        )
