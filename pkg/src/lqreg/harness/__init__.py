"""Configuration, seeded noise, experiment sweeps and the command line."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .experiment import RateReport, RateRow, run_experiment
from .noise import GENERATOR, gen_noise

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "RateReport",
    "RateRow",
    "run_experiment",
    "GENERATOR",
    "gen_noise",
]
