"""Experiment harness: configuration, runners, reports and golden files."""

from .config import EXPERIMENTS, ExperimentConfig, load_config
from .experiments import run
from .report import RunReport, compare_golden

__all__ = ["EXPERIMENTS", "ExperimentConfig", "load_config", "run", "RunReport", "compare_golden"]
