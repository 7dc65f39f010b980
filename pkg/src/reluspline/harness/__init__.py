"""Experiment configs, runners, heatmap rendering and the command line."""

from reluspline.harness.config import ConfigError, ExperimentConfig, load_config, shipped_config
from reluspline.harness.experiments import EXPERIMENTS, run_experiment
from reluspline.harness.heatmap import HeatmapGrid, render_heatmap

__all__ = [
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentConfig",
    "HeatmapGrid",
    "load_config",
    "render_heatmap",
    "run_experiment",
    "shipped_config",
]
