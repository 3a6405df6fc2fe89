"""Deterministic soil-sensing deployment simulator and measurement pipeline."""
from __future__ import annotations

from .channel import LinkModel, prr_from_lqi, transmit
from .collector import DownloadPolicy, export_level0, run_download
from .cube import Cube, CubeQuery
from .energy import BatteryModel, default_budget, predict_lifetime_days, total_avg_current
from .environment import EnvironmentModel
from .motesim import MoteState, advance, default_sensor_suite
from .registry import Registry, load_site_config
from .scenario import Scenario, load_scenario, run_scenario
from .store import Store

__version__ = "0.1.0"

__all__ = [
    "BatteryModel", "Cube", "CubeQuery", "DownloadPolicy", "EnvironmentModel",
    "LinkModel", "MoteState", "Registry", "Scenario", "Store", "advance",
    "default_budget", "default_sensor_suite", "export_level0", "load_scenario",
    "load_site_config", "predict_lifetime_days", "prr_from_lqi", "run_download",
    "run_scenario", "total_avg_current", "transmit", "__version__",
]
