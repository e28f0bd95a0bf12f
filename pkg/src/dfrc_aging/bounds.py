"""Block-1 CRLBs, their Fisher-information oracle and the aged bounds.

The aged bounds propagate the block-1 error covariance through the motion
Jacobians evaluated on a noise-free predicted trajectory.  ``trajectory[0]``
is always the block-1 state; ``trajectory[i]`` the prediction for block
``i + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig
from .errors import GeometryError
from .model import TargetState, derive_radar_link, evolve_state_linearized

SINGULAR_COS = 1e-3


@dataclass(frozen=True)
class Crlb1:
    """Block-1 bounds of one target for a given training allocation.

    ``sigma_*`` are the allocation-free numerators; the bounds divide them by
    ``p B M1``, ``p B M1 (B^2 - 1)`` and ``p B M1 (M1^2 - 1)``.
    """

    sigma_angle: float
    sigma_distance: float
    sigma_velocity: float
    power: float
    bandwidth: float
    training_symbols: int
    velocity_singular: bool = False

    @property
    def angle(self) -> float:
        return self.sigma_angle / (self.power * self.bandwidth * self.training_symbols)

    @property
    def distance(self) -> float:
        b = self.bandwidth
        return self.sigma_distance / (self.power * b * self.training_symbols * (b * b - 1))

    @property
    def velocity(self) -> float:
        m = self.training_symbols
        return self.sigma_velocity / (self.power * self.bandwidth * m * (m * m - 1))

    @property
    def diag(self) -> np.ndarray:
        return np.array([self.angle, self.distance, self.velocity])


def crlb_constants(state: TargetState, cfg: SystemConfig) -> tuple[float, float, float]:
    """Numerators of the three block-1 bounds.

    The velocity numerator is ``inf`` when the motion is tangential
    (``|cos(angle - heading)| < 1e-3``).
    """
    lt, lr = cfg.num_tx_antennas, cfg.num_rx_antennas
    if lr < 2:
        raise GeometryError("angle is unidentifiable with a single receive antenna")
    noise = cfg.bs_noise_psd * cfg.subcarrier_bandwidth
    alpha_sq = derive_radar_link(state, cfg).attenuation ** 2
    c0, df, fc, t = cfg.light_speed, cfg.subcarrier_bandwidth, cfg.carrier_freq, cfg.symbol_duration
    cos_theta = math.cos(state.angle)
    if abs(cos_theta) < SINGULAR_COS:
        raise GeometryError("target at endfire, angle bound undefined")
    sigma_angle = 6 * noise / (alpha_sq * math.pi ** 2 * cos_theta ** 2 * lt * lr * (lr ** 2 - 1))
    sigma_distance = 3 * c0 ** 2 * noise / (8 * (math.pi * df) ** 2 * alpha_sq * lt * lr)
    cos_rel = math.cos(state.relative_angle)
    if abs(cos_rel) < SINGULAR_COS:
        sigma_velocity = math.inf
    else:
        sigma_velocity = 3 * c0 ** 2 * noise / (8 * (math.pi * t) ** 2 * fc ** 2 * alpha_sq
                                                * cos_rel ** 2 * lt * lr)
    return sigma_angle, sigma_distance, sigma_velocity


def _check_allocation(bandwidth: float, training_symbols: int):
    if bandwidth < 2:
        raise ValueError("the distance bound needs at least 2 subcarriers")
    if training_symbols < 2:
        raise ValueError("the velocity bound needs at least 2 training symbols")


def crlb_block1(state: TargetState, power: float, bandwidth: float, cfg: SystemConfig,
                training_symbols: int | None = None) -> Crlb1:
    m1 = cfg.training_symbols if training_symbols is None else training_symbols
    _check_allocation(bandwidth, m1)
    if not power > 0:
        raise ValueError("training power must be positive")
    s_angle, s_dist, s_vel = crlb_constants(state, cfg)
    return Crlb1(s_angle, s_dist, s_vel, float(power), float(bandwidth), int(m1),
                 velocity_singular=math.isinf(s_vel))


def _fisher(derivs: list[np.ndarray], noise_var: float) -> np.ndarray:
    """Real Fisher matrix of complex-Gaussian observations from their derivatives."""
    d = np.stack(derivs)
    return (2.0 / noise_var) * np.real(d.conj() @ d.T)


def _model_derivatives(alpha, phase, theta, l, b, m, tau_bar, v_bar):
    """Partials of ``alpha exp(j(phase - l pi sin theta - b tau_bar + m v_bar))``."""
    y = alpha * np.exp(1j * (phase - l * np.pi * np.sin(theta) - b * tau_bar + m * v_bar))
    return {
        "angle": -1j * l * np.pi * np.cos(theta) * y,
        "tau": -1j * b * y,
        "vel": 1j * m * y,
        "alpha": y / alpha,
        "phase": 1j * y,
    }


def fisher_oracle(state: TargetState, power: float, bandwidth: int, training_symbols: int,
                  cfg: SystemConfig) -> np.ndarray:
    """Numeric block-1 bounds for (angle, distance, velocity).

    Each parameter is bounded from one snapshot along its own axis
    (antennas, subcarriers or symbols) with amplitude and phase as nuisance
    parameters; the snapshots along the two remaining axes are treated as
    independent, and the delay/Doppler bounds are mapped to distance and
    velocity by the chain rule.
    """
    bandwidth = int(bandwidth)
    _check_allocation(bandwidth, training_symbols)
    lt, lr = cfg.num_tx_antennas, cfg.num_rx_antennas
    noise_var = cfg.bs_noise_psd * cfg.subcarrier_bandwidth / (power * lt)
    link = derive_radar_link(state, cfg)
    tau_bar = 2 * np.pi * cfg.subcarrier_bandwidth * link.delay
    v_bar = 2 * np.pi * cfg.symbol_duration * link.doppler
    axes = {
        "angle": (np.arange(lr), 0, 0, training_symbols * bandwidth),
        "tau": (0, np.arange(bandwidth), 0, training_symbols * lr),
        "vel": (0, 0, np.arange(training_symbols), bandwidth * lr),
    }
    out = {}
    for name, (l, b, m, repeats) in axes.items():
        l, b, m = np.broadcast_arrays(l, b, m)
        parts = _model_derivatives(link.attenuation, state.phase_noise, state.angle,
                                   l, b, m, tau_bar, v_bar)
        fim = _fisher([parts[name], parts["alpha"], parts["phase"]], noise_var)
        scale = np.sqrt(np.diag(fim))
        if not np.all(scale > 0) or np.linalg.cond(fim / np.outer(scale, scale)) > 1e12:
            raise GeometryError(f"singular Fisher matrix for {name}")
        out[name] = np.linalg.inv(fim)[0, 0] / repeats
    dist_scale = cfg.light_speed / (4 * np.pi * cfg.subcarrier_bandwidth)
    cos_rel = math.cos(state.relative_angle)
    if abs(cos_rel) < SINGULAR_COS:
        raise GeometryError("tangential motion, velocity unobservable from Doppler")
    vel_scale = cfg.light_speed / (4 * np.pi * cfg.symbol_duration * cfg.carrier_freq * cos_rel)
    return np.array([out["angle"], dist_scale ** 2 * out["tau"], vel_scale ** 2 * out["vel"]])


def fisher_full(state: TargetState, power: float, bandwidth: int, training_symbols: int,
                cfg: SystemConfig) -> np.ndarray:
    """Joint 5x5 Fisher bound over every (symbol, subcarrier, antenna) sample.

    Memory grows as ``M1 * B * L_r``; meant for small configurations only.
    Returns the (angle, distance, velocity) bounds.
    """
    lr = cfg.num_rx_antennas
    noise_var = cfg.bs_noise_psd * cfg.subcarrier_bandwidth / (power * cfg.num_tx_antennas)
    link = derive_radar_link(state, cfg)
    tau_bar = 2 * np.pi * cfg.subcarrier_bandwidth * link.delay
    v_bar = 2 * np.pi * cfg.symbol_duration * link.doppler
    m, b, l = np.meshgrid(np.arange(training_symbols), np.arange(int(bandwidth)),
                          np.arange(lr), indexing="ij")
    parts = _model_derivatives(link.attenuation, state.phase_noise, state.angle,
                               l.ravel(), b.ravel(), m.ravel(), tau_bar, v_bar)
    fim = _fisher([parts[k] for k in ("angle", "tau", "vel", "alpha", "phase")], noise_var)
    crb = np.linalg.inv(fim)
    dist_scale = cfg.light_speed / (4 * np.pi * cfg.subcarrier_bandwidth)
    vel_scale = cfg.light_speed / (4 * np.pi * cfg.symbol_duration * cfg.carrier_freq
                                   * math.cos(state.relative_angle))
    return np.array([crb[0, 0], dist_scale ** 2 * crb[1, 1], vel_scale ** 2 * crb[2, 2]])


def jacobian(state: TargetState, block_duration: float) -> np.ndarray:
    """Jacobian of the linearized one-block motion map at ``state``."""
    d, v, t = state.distance, state.velocity, block_duration
    if not d > 0:
        raise GeometryError("distance must be positive")
    s, c = math.sin(state.relative_angle), math.cos(state.relative_angle)
    return np.array([
        [1 + v * t / d * c, -v * t / d ** 2 * s, t / d * s],
        [v * t * s, 1.0, -t * c],
        [0.0, 0.0, 1.0],
    ])


def predict_trajectory(state: TargetState, block_duration: float, num_blocks: int) -> list[TargetState]:
    """Noise-free predictions for blocks ``1..num_blocks`` starting from ``state``."""
    out = [state]
    for _ in range(num_blocks - 1):
        out.append(evolve_state_linearized(out[-1], block_duration))
    return out


@dataclass(frozen=True)
class ErrorCovariance:
    matrix: np.ndarray
    block_index: int

    @property
    def diag(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()


@dataclass(frozen=True)
class AgedCrlb:
    angle: float
    distance: float
    velocity: float
    a: float = 1.0
    b: float = 0.0
    block_index: int = 1

    @property
    def diag(self) -> np.ndarray:
        return np.array([self.angle, self.distance, self.velocity])


def _jacobians(trajectory, block_duration, n):
    if len(trajectory) < n - 1:
        raise ValueError(f"trajectory must cover blocks 1..{n - 1}")
    return [jacobian(trajectory[i], block_duration) for i in range(n - 1)]


def aged_covariance_exact(crlb1: Crlb1, trajectory: list[TargetState], sigma: np.ndarray,
                          n: int, block_duration: float) -> ErrorCovariance:
    """Closed-form aged covariance in block ``n`` (products of Jacobians).

    ``n = 1`` returns the block-1 diagonal; otherwise ``n >= 2``.
    """
    if n < 1:
        raise ValueError("block index must be >= 1")
    d = np.diag(crlb1.diag)
    if n == 1:
        return ErrorCovariance(d, 1)
    gs = _jacobians(trajectory, block_duration, n)
    total = np.eye(3)
    for g in gs:
        total = g @ total
    e = total @ d @ total.T
    # noise injected in block j is carried by G_{n-1} ... G_j
    for j in range(2, n + 1):
        carry = np.eye(3)
        for g in gs[j - 1:]:
            carry = g @ carry
        e = e + carry @ sigma @ carry.T
    return ErrorCovariance(e, n)


def aged_covariance_recursive(crlb1: Crlb1, trajectory, sigma, n, block_duration) -> ErrorCovariance:
    """Same quantity as :func:`aged_covariance_exact` via ``E <- G E G^T + Sigma``."""
    e = np.diag(crlb1.diag)
    for g in _jacobians(trajectory, block_duration, n):
        e = g @ e @ g.T + sigma
    return ErrorCovariance(e, n)


def radial_rates(trajectory: list[TargetState], block_duration: float) -> np.ndarray:
    """Per-block terms ``v T cos(theta - heading) / d`` along the trajectory."""
    return np.array([s.velocity * block_duration * math.cos(s.relative_angle) / s.distance
                     for s in trajectory])


def aging_coefficients(trajectory: list[TargetState], block_duration: float, n: int) -> tuple[float, float]:
    """Angle amplification factors ``(a, b)`` of the approximate aged bound.

    ``b`` multiplies the angle evolution variance; at ``n = 1`` no evolution
    noise has accumulated and ``b = 0``.
    """
    if n <= 1:
        return 1.0, 0.0
    c = radial_rates(trajectory[: n - 1], block_duration)
    if len(c) < n - 1:
        raise ValueError(f"trajectory must cover blocks 1..{n - 1}")
    a = (1.0 + c.sum()) ** 2
    # c[i - 1] corresponds to block i
    b = 1.0 + sum((1.0 + c[i - 1:].sum()) ** 2 for i in range(2, n))
    return float(a), float(b)


def aged_crlb_approx(crlb1: Crlb1, trajectory: list[TargetState], sigma: np.ndarray,
                     n: int, block_duration: float) -> AgedCrlb:
    a, b = aging_coefficients(trajectory, block_duration, n)
    return AgedCrlb(
        angle=a * crlb1.angle + b * sigma[0, 0],
        distance=crlb1.distance + (n - 1) * sigma[1, 1],
        velocity=crlb1.velocity + (n - 1) * sigma[2, 2],
        a=a, b=b, block_index=n,
    )
