"""Dual-function radar-communication under channel aging.

Modules: ``model`` (geometry, state evolution, channels), ``radar``
(measurement synthesis and periodogram estimation), ``bounds`` (block-1 and
aged tracking bounds), ``comm`` (MMSE training, MRT/ZF SINR and rates),
``allocation`` (training/data allocation and interval search), ``checker``,
``experiments``, ``plotting`` and ``cli``.
"""

from .config import ScenarioParams, SystemConfig, load_config
from .errors import (ConfigError, DfrcError, GeometryError, InfeasibleError, Infeasibility,
                     InvalidRegimeError, RankDeficientError)
from .model import CommUserModel, Scenario, TargetState, sample_scenario

__version__ = "0.1.0"

__all__ = [
    "CommUserModel", "ConfigError", "DfrcError", "GeometryError", "InfeasibleError",
    "Infeasibility", "InvalidRegimeError", "RankDeficientError", "Scenario", "ScenarioParams",
    "SystemConfig", "TargetState", "load_config", "sample_scenario",
]
