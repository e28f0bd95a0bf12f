"""Post-DFT radar measurements and the block-1 periodogram estimators.

Measurements live on an ``(M1, B_k, L_r)`` grid.  Each entry is
``alpha e^{j phase} a(theta) e^{j 2 pi m T nu} e^{-j 2 pi b df tau}`` times the
known training symbol, plus white noise.  With the unit-norm steering vector
``a`` the per-element noise variance is ``sigma df / (p L_t L_r)``, which
keeps the per-element SNR at ``|alpha|^2 p L_t / (sigma df)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .config import SystemConfig
from .errors import GeometryError
from .model import RadarLink, TargetState, complex_normal, derive_radar_link, steering_vector

SINGULAR_COS = 1e-3
ZERO_PAD = 8


@dataclass(frozen=True)
class RadarMeasurement:
    grid: np.ndarray  # (M1, B_k, L_r), training symbols already present
    symbols: np.ndarray  # (M1, B_k) unit-modulus QPSK
    noise_variance: float
    symbol_duration: float
    subcarrier_bandwidth: float

    def __post_init__(self):
        if self.grid.ndim != 3 or self.grid.shape[:2] != self.symbols.shape:
            raise ValueError("grid must be (M1, B_k, L_r) matching the symbol grid")

    @property
    def band_size(self) -> int:
        return self.grid.shape[1]

    @property
    def equalized(self) -> np.ndarray:
        """Grid with the known training symbols removed."""
        return self.grid * np.conj(self.symbols)[..., None]


@dataclass(frozen=True)
class MobilityEstimate:
    angle: float
    distance: float
    velocity: float
    delay: float = float("nan")
    doppler: float = float("nan")

    @property
    def mobility(self) -> np.ndarray:
        return np.array([self.angle, self.distance, self.velocity])


def element_noise_variance(power: float, cfg: SystemConfig) -> float:
    return cfg.bs_noise_psd * cfg.subcarrier_bandwidth / (power * cfg.num_tx_antennas
                                                          * cfg.num_rx_antennas)


def qpsk(rng: np.random.Generator, shape) -> np.ndarray:
    return np.exp(1j * (np.pi / 4 + np.pi / 2 * rng.integers(0, 4, size=shape)))


def _echo(link: RadarLink, angle: float, phase: float, m1: int, band: int, cfg: SystemConfig):
    m = np.arange(m1)[:, None, None]
    b = np.arange(band)[None, :, None]
    a = steering_vector(angle, cfg.num_rx_antennas)[None, None, :]
    return (link.attenuation * np.exp(1j * phase) * a
            * np.exp(2j * np.pi * m * cfg.symbol_duration * link.doppler)
            * np.exp(-2j * np.pi * b * cfg.subcarrier_bandwidth * link.delay))


def synthesize_measurement(state: TargetState, power: float, band_size: int, cfg: SystemConfig,
                           rng: np.random.Generator | None, link: RadarLink | None = None,
                           training_symbols: int | None = None,
                           interferers: tuple[TargetState, ...] = (),
                           noiseless: bool = False) -> RadarMeasurement:
    """Simulated block-1 measurement of one target on its own band.

    ``interferers`` adds the echoes of other targets leaking through the
    transmit beam pointed at ``state.angle``; by default bands are isolated.
    """
    if band_size < 1:
        raise ValueError("band_size must be >= 1")
    if not power > 0:
        raise ValueError("power must be positive")
    m1 = cfg.training_symbols if training_symbols is None else training_symbols
    link = link or derive_radar_link(state, cfg)
    signal = _echo(link, state.angle, state.phase_noise, m1, band_size, cfg)
    beam = steering_vector(state.angle, cfg.num_tx_antennas)
    for other in interferers:
        leak = np.vdot(steering_vector(other.angle, cfg.num_tx_antennas), beam)
        signal = signal + leak * _echo(derive_radar_link(other, cfg), other.angle,
                                       other.phase_noise, m1, band_size, cfg)
    var = element_noise_variance(power, cfg)
    if rng is None:
        rng = np.random.default_rng(0)
        noiseless = True
    symbols = qpsk(rng, (m1, band_size))
    grid = signal * symbols[..., None]
    if not noiseless:
        grid = grid + complex_normal(rng, grid.shape, var)
    return RadarMeasurement(grid, symbols, var, cfg.symbol_duration, cfg.subcarrier_bandwidth)


def _spatial_covariance(meas: RadarMeasurement) -> np.ndarray:
    y = meas.equalized.reshape(-1, meas.grid.shape[2])
    return y.T @ y.conj()


def angle_spectrum(meas: RadarMeasurement, angles) -> np.ndarray:
    """``sum_{m,b} |a^H(theta) y(m, b)|^2`` at each angle."""
    r = _spatial_covariance(meas)
    a = steering_vector(np.atleast_1d(angles), meas.grid.shape[2])
    return np.real(np.einsum("gi,ij,gj->g", a.conj(), r, a))


def estimate_angle(meas: RadarMeasurement, grid_points: int | None = None,
                   tol: float = 1e-6) -> float:
    """Angle periodogram maximum: coarse grid, then bounded scalar refinement."""
    lr = meas.grid.shape[2]
    n = grid_points or 4 * lr
    grid = np.linspace(-np.pi / 2, np.pi / 2, n)
    r = _spatial_covariance(meas)
    spec = np.real(np.einsum("gi,ij,gj->g", steering_vector(grid, lr).conj(), r,
                             steering_vector(grid, lr)))
    i = int(np.argmax(spec))
    step = grid[1] - grid[0]
    lo, hi = max(grid[i] - step, -np.pi / 2), min(grid[i] + step, np.pi / 2)

    def cost(theta):
        a = steering_vector(theta, lr)
        return -float(np.real(a.conj() @ r @ a))

    res = optimize.minimize_scalar(cost, bounds=(lo, hi), method="bounded",
                                   options={"xatol": tol})
    return float(res.x)


def _beamformed(meas: RadarMeasurement, angle: float) -> np.ndarray:
    a = steering_vector(angle, meas.grid.shape[2])
    return meas.equalized @ a.conj()


def delay_doppler_periodogram(z: np.ndarray, delay: float, doppler: float,
                              symbol_duration: float, subcarrier_bandwidth: float) -> float:
    m = np.arange(z.shape[0])
    b = np.arange(z.shape[1])
    em = np.exp(-2j * np.pi * m * symbol_duration * doppler)
    eb = np.exp(2j * np.pi * b * subcarrier_bandwidth * delay)
    return float(abs(em @ z @ eb) ** 2)


def _parabolic(left, centre, right) -> float:
    denom = left - 2 * centre + right
    if denom == 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))


def estimate_delay_doppler(meas: RadarMeasurement, angle: float, refine: bool = True,
                           zero_pad: int = ZERO_PAD) -> tuple[float, float]:
    """Delay/Doppler periodogram maximum.

    A zero-padded 2-D FFT with 3-point parabolic interpolation gives the
    coarse peak; ``refine`` then polishes it on the exact periodogram, which
    removes the interpolation bias.  Delay lies in ``[0, 1/df)``, Doppler in
    ``[-1/(2T), 1/(2T))``.
    """
    if not np.isfinite(angle):
        raise ValueError("angle must be finite")
    z = _beamformed(meas, angle)
    m1, band = z.shape
    nm, nb = zero_pad * m1, zero_pad * band
    # Doppler enters as e^{+j2pi m T nu}, delay as e^{-j2pi b df tau}
    spec = np.abs(np.fft.ifft(np.fft.fft(z, n=nm, axis=0), n=nb, axis=1)) ** 2
    im, ib = np.unravel_index(int(np.argmax(spec)), spec.shape)
    dm = _parabolic(spec[(im - 1) % nm, ib], spec[im, ib], spec[(im + 1) % nm, ib])
    db = _parabolic(spec[im, (ib - 1) % nb], spec[im, ib], spec[im, (ib + 1) % nb])
    t, df = meas.symbol_duration, meas.subcarrier_bandwidth
    km = im + dm
    if km >= nm / 2:
        km -= nm
    doppler = km / (nm * t)
    delay = ((ib + db) % nb) / (nb * df)
    if refine:
        # search in original-bin units so both axes are O(1)
        sm, sb = 1.0 / (m1 * t), 1.0 / (band * df)

        def cost(x):
            return -delay_doppler_periodogram(z, delay + x[0] * sb, doppler + x[1] * sm, t, df)

        res = optimize.minimize(cost, np.zeros(2), method="Nelder-Mead",
                                options={"xatol": 1e-7, "fatol": 1e-12 * -cost(np.zeros(2)),
                                         "initial_simplex": [[0, 0], [0.05, 0], [0, 0.05]],
                                         "maxiter": 400})
        delay += res.x[0] * sb
        doppler += res.x[1] * sm
    delay = delay % (1.0 / df)
    doppler = (doppler + 0.5 / t) % (1.0 / t) - 0.5 / t
    return float(delay), float(doppler)


def to_mobility(delay: float, doppler: float, angle: float, heading: float,
                cfg: SystemConfig) -> MobilityEstimate:
    cos_rel = math.cos(angle - heading)
    if abs(cos_rel) < SINGULAR_COS:
        raise GeometryError("motion is tangential to the line of sight; velocity unobservable")
    distance = delay * cfg.light_speed / 2.0
    velocity = doppler * cfg.light_speed / (2.0 * cfg.carrier_freq * cos_rel)
    return MobilityEstimate(angle, distance, velocity, delay, doppler)


def estimate_mobility(meas: RadarMeasurement, heading: float, cfg: SystemConfig,
                      refine: bool = True) -> MobilityEstimate:
    angle = estimate_angle(meas)
    delay, doppler = estimate_delay_doppler(meas, angle, refine=refine)
    return to_mobility(delay, doppler, angle, heading, cfg)
