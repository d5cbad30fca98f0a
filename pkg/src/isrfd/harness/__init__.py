"""Scenario configuration, Monte Carlo execution and metric aggregation."""

from isrfd.harness.config import ScenarioConfig, load_config, parse_config
from isrfd.harness.montecarlo import (
    CSV_HEADER,
    EpochOutcome,
    MetricsRow,
    confusion,
    run_epoch,
    run_montecarlo,
    write_csv,
)

__all__ = [
    "CSV_HEADER",
    "EpochOutcome",
    "MetricsRow",
    "ScenarioConfig",
    "confusion",
    "load_config",
    "parse_config",
    "run_epoch",
    "run_montecarlo",
    "write_csv",
]
