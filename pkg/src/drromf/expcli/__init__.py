"""Experiment configuration, orchestration and command-line interface."""

from .config import CONTROLLER_TAGS, ConfigError, ExperimentConfig, dump_config, load_config
from .experiment import (CSV_COLUMNS, ExperimentOutput, ResultRow, emit_results, load_results,
                         results_csv, results_json, run_experiment)
from .presets import BOEING747, BOEING747_RADII, PRESETS, preset_system

__all__ = ["CONTROLLER_TAGS", "ConfigError", "ExperimentConfig", "dump_config", "load_config",
           "CSV_COLUMNS", "ExperimentOutput", "ResultRow", "emit_results", "load_results",
           "results_csv", "results_json", "run_experiment", "BOEING747", "BOEING747_RADII",
           "PRESETS", "preset_system"]
