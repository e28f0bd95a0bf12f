"""Domain types, scenario sampling and the two channel-aging models."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .config import ScenarioParams, SystemConfig
from .errors import GeometryError


@dataclass(frozen=True)
class TargetState:
    """Mobility triple of one radar target plus its static attributes.

    ``heading`` is the (known, constant) direction of motion; the relative
    angle ``angle - heading`` sets how much of the velocity is radial.
    """

    angle: float
    distance: float
    velocity: float
    heading: float = 0.0
    angle_var: float = 1e-5
    distance_var: float = 0.2
    velocity_var: float = 0.1
    rcs: float = 1.0
    phase_noise: float = 0.0

    def __post_init__(self):
        if not self.distance > 0:
            raise GeometryError(f"target distance must be positive, got {self.distance}")
        if min(self.angle_var, self.distance_var, self.velocity_var) <= 0:
            raise ValueError("evolution variances must be positive")

    @property
    def relative_angle(self) -> float:
        return self.angle - self.heading

    @property
    def mobility(self) -> np.ndarray:
        return np.array([self.angle, self.distance, self.velocity])

    @property
    def evolution_cov(self) -> np.ndarray:
        return np.diag([self.angle_var, self.distance_var, self.velocity_var])

    def with_mobility(self, angle: float, distance: float, velocity: float) -> "TargetState":
        return dataclasses.replace(self, angle=float(angle), distance=float(distance),
                                   velocity=float(velocity))


@dataclass(frozen=True)
class CommUserModel:
    """Statistics of one single-antenna user.

    The MMSE quality factor depends on the training allocation and is
    computed by :func:`dfrc_aging.comm.mmse_quality`.
    """

    beta: float
    rho: float
    min_rate: float = 0.0
    distance: float = float("nan")

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("large-scale gain must be positive")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("temporal correlation must lie in [0, 1]")
        if self.min_rate < 0:
            raise ValueError("minimum rate must be nonnegative")


@dataclass(frozen=True)
class RadarLink:
    attenuation: float
    delay: float
    doppler: float


@dataclass(frozen=True)
class Scenario:
    targets: tuple[TargetState, ...]
    users: tuple[CommUserModel, ...]
    seed: int = 0
    trial: int = 0


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``.

    Streams for different keys never overlap and do not depend on the order
    in which they are requested, so Monte Carlo trials can run in any order
    or in parallel.
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def complex_normal(rng: np.random.Generator, shape, variance=1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with the given variance."""
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def steering_vector(angle, num_elements: int) -> np.ndarray:
    """Half-wavelength ULA response ``exp(-j pi l sin(angle)) / sqrt(L)``.

    ``angle`` may be an array; the element axis is appended last.
    """
    if num_elements < 1:
        raise ValueError("num_elements must be >= 1")
    l = np.arange(num_elements)
    phase = np.multiply.outer(np.sin(np.asarray(angle, dtype=float)), l)
    return np.exp(-1j * np.pi * phase) / np.sqrt(num_elements)


def derive_radar_link(state: TargetState, cfg: SystemConfig) -> RadarLink:
    d = state.distance
    if not d > 0:
        raise GeometryError("distance must be positive")
    c0, fc = cfg.light_speed, cfg.carrier_freq
    alpha = math.sqrt(c0 ** 2 * state.rcs / ((4 * math.pi) ** 3 * fc ** 2 * d ** 4))
    tau = 2.0 * d / c0
    doppler = 2.0 * state.velocity * math.cos(state.relative_angle) * fc / c0
    return RadarLink(alpha, tau, doppler)


def _add_evolution_noise(state: TargetState, angle, distance, velocity, rng):
    if rng is not None:
        noise = rng.standard_normal(3) * np.sqrt([state.angle_var, state.distance_var,
                                                  state.velocity_var])
        angle, distance, velocity = angle + noise[0], distance + noise[1], velocity + noise[2]
    if not distance > 0:
        raise GeometryError("evolved distance is nonpositive")
    return state.with_mobility(angle, distance, velocity)


def evolve_state_exact(state: TargetState, block_duration: float,
                       rng: np.random.Generator | None = None) -> TargetState:
    """One block of motion using the exact triangle (law of cosines/sines).

    ``rng=None`` gives the noise-free update.
    """
    step = state.velocity * block_duration
    rel = state.relative_angle
    radial = state.distance - step * math.cos(rel)
    tangential = step * math.sin(rel)
    d_sq = state.distance ** 2 + step ** 2 - 2 * state.distance * step * math.cos(rel)
    if d_sq <= 0:
        raise GeometryError("target passes through the base station")
    angle = state.angle + math.atan2(tangential, radial)
    return _add_evolution_noise(state, angle, math.sqrt(d_sq), state.velocity, rng)


def linearized_step(mobility: np.ndarray, heading: float, block_duration: float) -> np.ndarray:
    """Noise-free first-order motion map on a ``(angle, distance, velocity)`` array."""
    theta, d, v = mobility
    rel = theta - heading
    step = v * block_duration
    return np.array([theta + step * math.sin(rel) / d, d - step * math.cos(rel), v])


def evolve_state_linearized(state: TargetState, block_duration: float,
                            rng: np.random.Generator | None = None) -> TargetState:
    theta, d, v = linearized_step(state.mobility, state.heading, block_duration)
    return _add_evolution_noise(state, theta, d, v, rng)


def age_comm_channel(h_prev: np.ndarray, rho: float, beta: float,
                     rng: np.random.Generator) -> np.ndarray:
    """First-order Gauss-Markov update ``rho h + sqrt(1 - rho^2) e``."""
    if abs(rho) > 1:
        raise ValueError("|rho| must not exceed 1")
    h_prev = np.asarray(h_prev)
    innovation = complex_normal(rng, h_prev.shape, beta)
    return rho * h_prev + math.sqrt(1.0 - rho ** 2) * innovation


def pathloss_db(distance_m, params: ScenarioParams = ScenarioParams()):
    return params.pathloss_intercept_db + params.pathloss_slope_db * np.log10(distance_m / 1.0)


def min_rate_requirement(beta: float, cfg: SystemConfig,
                         params: ScenarioParams = ScenarioParams()) -> float:
    snr = cfg.total_power * beta / (cfg.user_noise_power * cfg.num_users)
    return params.min_rate_fraction * math.log2(1.0 + snr)


def _sample_heading(angle: float, rng: np.random.Generator, min_radial_cos: float) -> float:
    span = math.acos(min_radial_cos)
    offset = rng.uniform(-span, span)
    if rng.random() < 0.5:
        offset += math.pi
    return float((angle - offset) % (2 * math.pi))


def sample_target(k: int, rng: np.random.Generator,
                  params: ScenarioParams = ScenarioParams()) -> TargetState:
    """Target ``k`` (1-based) with its angle drawn from the k-th angular slot."""
    width = params.angle_slot_width
    angle = rng.uniform((k - 1) * width, k * width)
    distance = rng.uniform(*params.target_distance_range)
    velocity = rng.uniform(*params.target_velocity_range)
    heading = _sample_heading(angle, rng, params.min_radial_cos)
    phase = rng.uniform(0.0, 2 * math.pi)
    return TargetState(angle=angle, distance=distance, velocity=velocity, heading=heading,
                       angle_var=params.angle_variance, distance_var=params.distance_variance,
                       velocity_var=params.velocity_variance, rcs=params.rcs, phase_noise=phase)


def sample_user(rng: np.random.Generator, cfg: SystemConfig,
                params: ScenarioParams = ScenarioParams()) -> CommUserModel:
    distance = rng.uniform(*params.user_distance_range)
    beta = 10.0 ** (-pathloss_db(distance, params) / 10.0)
    return CommUserModel(beta=float(beta), rho=params.temporal_corr,
                         min_rate=min_rate_requirement(beta, cfg, params), distance=distance)


def sample_scenario(cfg: SystemConfig, seed: int, trial: int = 0,
                    params: ScenarioParams = ScenarioParams()) -> Scenario:
    """Random targets and users for one Monte Carlo trial.

    Target ``k`` and user ``q`` each get their own stream, so the first ``Q``
    users are the same whatever ``cfg.num_users`` is, and a power sweep at a
    fixed seed keeps the geometry fixed.
    """
    targets = tuple(sample_target(k, stream(seed, trial, 0, k), params)
                    for k in range(1, cfg.num_targets + 1))
    users = tuple(sample_user(stream(seed, trial, 1, q), cfg, params)
                  for q in range(1, cfg.num_users + 1))
    return Scenario(targets=targets, users=users, seed=seed, trial=trial)


def tracking_limits(state: TargetState, params: ScenarioParams = ScenarioParams()) -> np.ndarray:
    """Maximum admissible aged bounds for (angle, distance, velocity)."""
    return params.tracking_margin * np.array([state.angle_var, state.distance_var,
                                              state.velocity_var])
