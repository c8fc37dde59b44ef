"""Experiment harness: configs, runners, CLI."""

from ddlink.harness.config import ConfigError, ExperimentConfig, load_config, parse_config

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config"]
