"""Experiment orchestration, result documents and the command line."""

from .config import ExperimentConfig
from .results import Cell, RunResult
from .runners import run, run_compare, run_exp1, run_exp2, run_exp3, run_sweep

__all__ = ["ExperimentConfig", "Cell", "RunResult", "run", "run_compare", "run_exp1", "run_exp2",
           "run_exp3", "run_sweep"]
