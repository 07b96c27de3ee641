"""Metrics, configuration, Monte-Carlo runner, trace I/O and the command line."""

from .config import ExperimentConfig, load_config
from .experiment import ExperimentResult, TrialRecord, run_experiment, write_outputs
from .metrics import nmse, r_squared, reconstruction_nmse, support_nmse, weighted_accuracy
from .traces import ingest_traces, read_traces, write_traces

__all__ = [
    "ExperimentConfig",
    "load_config",
    "ExperimentResult",
    "TrialRecord",
    "run_experiment",
    "write_outputs",
    "nmse",
    "r_squared",
    "reconstruction_nmse",
    "support_nmse",
    "weighted_accuracy",
    "ingest_traces",
    "read_traces",
    "write_traces",
]
