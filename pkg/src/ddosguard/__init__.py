"""Predictive DDoS detection and mitigation for a cloud of virtual servers.

Per-VM agents forecast bandwidth with an aging predictor and raise three
alert levels; a central management service tasks a mining center, turns
mined signatures into IDPS rules and drives DSCP-aware firewall policing.
Everything runs inside a deterministic, tick-driven simulator.
"""

from .predictor import AgingPredictor, AlertLevel, AlertThresholds, classify, compute_beta
from .scenarios import canonical_config
from .sim.config import ConfigError, ScenarioConfig, load_config, parse_config
from .sim.engine import Simulation, run
from .sim.metrics import export_csv, read_csv

__version__ = "0.1.0"

__all__ = [
    "AgingPredictor", "AlertLevel", "AlertThresholds", "ConfigError", "ScenarioConfig",
    "Simulation", "canonical_config", "classify", "compute_beta", "export_csv",
    "load_config", "parse_config", "read_csv", "run",
]
