"""Experiment runner around the BO engine: config, batch runs, tables, plots, audits."""

from .config import ExperimentConfig, from_dict, load
from .plots import emit_plots
from .replay import reexecute, replay
from .runner import run_experiment, summarize

__all__ = [
    "ExperimentConfig",
    "from_dict",
    "load",
    "emit_plots",
    "reexecute",
    "replay",
    "run_experiment",
    "summarize",
]
