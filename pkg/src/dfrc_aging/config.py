"""System and scenario configuration.

Both dataclasses are frozen; use :func:`dataclasses.replace` or
:func:`apply_overrides` to derive variants.  Configuration files are TOML
with flat snake_case keys matching the field names of either class.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .errors import ConfigError


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt / 1e-3)


NOISE_PSD_W_PER_HZ = dbm_to_watt(-174.0)


@dataclass(frozen=True)
class SystemConfig:
    """Static parameters of the DFRC link.

    Defaults are the desk-scale setup: 5.89 GHz OFDM numerology with a
    16 x 32 array, 3 targets and 6 users at -5 dBm.
    """

    num_tx_antennas: int = 16
    num_rx_antennas: int = 32
    num_targets: int = 3
    num_users: int = 6
    symbols_per_block: int = 700
    training_symbols: int = 300
    total_subcarriers: int = 64
    subcarrier_bandwidth: float = 156.25e3
    cp_duration: float = 1.6e-6
    carrier_freq: float = 5.89e9
    light_speed: float = 3e8
    total_power: float = dbm_to_watt(-5.0)
    bs_noise_psd: float = NOISE_PSD_W_PER_HZ
    user_noise_psd: float = NOISE_PSD_W_PER_HZ

    def __post_init__(self):
        for name in ("num_tx_antennas", "num_rx_antennas", "num_targets",
                     "num_users", "symbols_per_block", "training_symbols",
                     "total_subcarriers"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        for name in ("subcarrier_bandwidth", "carrier_freq", "light_speed",
                     "total_power", "bs_noise_psd", "user_noise_psd"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.cp_duration < 0:
            raise ConfigError("cp_duration must be nonnegative")
        if not 2 <= self.training_symbols < self.symbols_per_block:
            raise ConfigError("need 2 <= training_symbols < symbols_per_block")
        if self.num_tx_antennas < self.num_users + 1:
            raise ConfigError("zero-forcing needs num_tx_antennas >= num_users + 1")
        if self.total_subcarriers < self.num_targets + 1:
            raise ConfigError("need total_subcarriers >= num_targets + 1")

    @property
    def symbol_duration(self) -> float:
        return 1.0 / self.subcarrier_bandwidth + self.cp_duration

    @property
    def block_duration(self) -> float:
        return self.symbols_per_block * self.symbol_duration

    @property
    def user_noise_power(self) -> float:
        """Per-subcarrier noise power at a user (W)."""
        return self.user_noise_psd * self.subcarrier_bandwidth

    @property
    def wavelength(self) -> float:
        return self.light_speed / self.carrier_freq


@dataclass(frozen=True)
class ScenarioParams:
    """Distributions used by :func:`dfrc_aging.model.sample_scenario`."""

    temporal_corr: float = 0.96
    angle_variance: float = 1e-5
    distance_variance: float = 0.2
    velocity_variance: float = 0.1
    tracking_margin: float = 15.0
    rcs: float = 1.0
    target_distance_range: tuple = (100.0, 300.0)
    target_velocity_range: tuple = (15.0, 45.0)
    angle_slot_width: float = math.pi / 16
    user_distance_range: tuple = (1500.0, 4500.0)
    pathloss_intercept_db: float = 74.24
    pathloss_slope_db: float = 16.1
    min_rate_fraction: float = 0.1
    # |cos(angle - heading)| lower bound; 0 gives a heading uniform on [0, 2pi)
    min_radial_cos: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.temporal_corr <= 1.0:
            raise ConfigError("temporal_corr must lie in [0, 1]")
        for name in ("angle_variance", "distance_variance", "velocity_variance",
                     "tracking_margin", "rcs"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 <= self.min_radial_cos < 1.0:
            raise ConfigError("min_radial_cos must lie in [0, 1)")


def paper_scale(cfg: SystemConfig | None = None, **changes) -> SystemConfig:
    """Array and population sizes of the allocation figures (L_t=32, L_r=64)."""
    cfg = cfg or SystemConfig()
    base = dict(num_tx_antennas=32, num_rx_antennas=64, num_targets=4, num_users=10)
    base.update(changes)
    return dataclasses.replace(cfg, **base)


def _field_types(cls) -> dict[str, Any]:
    return {f.name: f.default for f in fields(cls)}


SYSTEM_KEYS = tuple(f.name for f in fields(SystemConfig))
SCENARIO_KEYS = tuple(f.name for f in fields(ScenarioParams))
VALID_KEYS = SYSTEM_KEYS + SCENARIO_KEYS


def _coerce(key: str, value: Any, default: Any) -> Any:
    if isinstance(default, bool):
        if isinstance(value, str):
            return value.lower() in ("1", "true", "yes")
        return bool(value)
    if isinstance(default, int):
        number = float(value)
        if number != int(number):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(number)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, tuple):
        if isinstance(value, str):
            value = [v for v in value.strip("()[] ").split(",") if v.strip()]
        return tuple(float(v) for v in value)
    return value


def apply_overrides(cfg: SystemConfig, params: ScenarioParams,
                    overrides: Mapping[str, Any]) -> tuple[SystemConfig, ScenarioParams]:
    """Return copies of ``cfg``/``params`` with flat ``key: value`` overrides applied.

    Unknown keys raise :class:`ConfigError` listing the valid keys.  Values
    may be strings (as given on a command line) and are coerced to the type
    of the field default.
    """
    sys_defaults = _field_types(SystemConfig)
    scen_defaults = _field_types(ScenarioParams)
    sys_changes, scen_changes = {}, {}
    for key, value in overrides.items():
        if key in sys_defaults:
            sys_changes[key] = _coerce(key, value, sys_defaults[key])
        elif key in scen_defaults:
            scen_changes[key] = _coerce(key, value, scen_defaults[key])
        else:
            raise ConfigError(
                f"unknown configuration key {key!r}; valid keys: {', '.join(VALID_KEYS)}")
    try:
        cfg = dataclasses.replace(cfg, **sys_changes)
        params = dataclasses.replace(params, **scen_changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, params


def load_config(path: str | Path | None = None,
                overrides: Mapping[str, Any] | None = None) -> tuple[SystemConfig, ScenarioParams]:
    """Load a TOML configuration file (flat keys) and apply overrides."""
    data: dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text()
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for key, value in data.items():
            if isinstance(value, dict):
                raise ConfigError(f"{path}: key {key!r}: tables are not supported, use flat keys")
    merged = dict(data)
    merged.update(overrides or {})
    return apply_overrides(SystemConfig(), ScenarioParams(), merged)


def dump_config(cfg: SystemConfig, params: ScenarioParams | None = None) -> str:
    """Render a configuration as flat TOML (round-trips through :func:`load_config`)."""
    lines = []
    for obj in (cfg, params or ScenarioParams()):
        for f in fields(obj):
            value = getattr(obj, f.name)
            if isinstance(value, tuple):
                rendered = "[" + ", ".join(repr(float(v)) for v in value) + "]"
            else:
                rendered = repr(value)
            lines.append(f"{f.name} = {rendered}")
    return "\n".join(lines) + "\n"
