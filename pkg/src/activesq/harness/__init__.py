"""Configuration, trial orchestration and the command-line interface."""

from .config import ExperimentConfig, load_config, parse_pairs
from .experiment import ExperimentReport, TrialResult, TrueError, run_experiment, run_trial, true_error

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "TrialResult",
    "TrueError",
    "load_config",
    "parse_pairs",
    "run_experiment",
    "run_trial",
    "true_error",
]
