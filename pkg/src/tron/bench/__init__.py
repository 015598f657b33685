"""Benchmark harness: experiment configs, runs, CSV artifacts and plots."""
from .config import ConfigError, ExperimentConfig, default_config, load_config
from .runner import RunArtifacts, run_experiment
from .sparsity import SparsityRecord, sparsity_report

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RunArtifacts",
    "SparsityRecord",
    "default_config",
    "load_config",
    "run_experiment",
    "sparsity_report",
]
