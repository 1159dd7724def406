"""dfpsched: multi-resource HPC scheduling simulator and policy library."""

__version__ = "0.1.0"
