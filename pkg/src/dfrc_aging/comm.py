"""MMSE channel training, aged CSI prediction, MRT/ZF beamforming and SINR.

Notation: ``p0`` and ``B0`` are the training power and subcarrier count of
the communication band; ``quality`` (lambda) is the per-entry variance of the
MMSE estimate; ``n`` is the 1-based block index after training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import SystemConfig
from .errors import InvalidRegimeError, RankDeficientError
from .model import CommUserModel, complex_normal

SCHEMES = ("mrt", "zf")


def _check_scheme(scheme: str) -> str:
    scheme = scheme.lower()
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    return scheme


def mmse_quality(beta, p0: float, b0: float, cfg: SystemConfig, training_symbols: int | None = None):
    """Variance ``lambda`` of each entry of the MMSE channel estimate."""
    m1 = cfg.training_symbols if training_symbols is None else training_symbols
    beta = np.asarray(beta, dtype=float)
    snr = m1 * beta * p0 * b0
    out = beta * snr / (cfg.num_tx_antennas * cfg.user_noise_power + snr)
    return float(out) if out.ndim == 0 else out


def training_matrix(num_tx: int, training_symbols: int) -> np.ndarray:
    """``L_t x M1`` pilot matrix with ``F F^H = (M1 / L_t) I`` and unit-norm columns."""
    if training_symbols < num_tx:
        raise ValueError("orthogonal training needs training_symbols >= num_tx_antennas")
    m = np.arange(training_symbols)
    dft = np.exp(-2j * np.pi * np.outer(np.arange(num_tx), m) / training_symbols)
    return dft / math.sqrt(num_tx)


@dataclass(frozen=True)
class ChannelEstimate:
    h_hat: np.ndarray
    quality: float
    beta: float

    @property
    def error_variance(self) -> float:
        return self.beta - self.quality


def mmse_estimate(h_true: np.ndarray, p0: float, b0: float, user: CommUserModel,
                  cfg: SystemConfig, rng: np.random.Generator,
                  training_symbols: int | None = None) -> ChannelEstimate:
    """Simulate the pilot observation of one user and apply the MMSE estimator."""
    if not (p0 > 0 and b0 > 0):
        raise ValueError("training power and bandwidth must be positive")
    lt = cfg.num_tx_antennas
    m1 = cfg.training_symbols if training_symbols is None else training_symbols
    f0 = training_matrix(lt, m1)
    y = math.sqrt(p0) * f0.conj().T @ h_true + complex_normal(rng, m1, cfg.user_noise_power / b0)
    least_squares = (lt / m1) * (f0 @ y) / math.sqrt(p0)
    shrink = 1.0 / (1.0 + lt * cfg.user_noise_power / (m1 * b0 * p0 * user.beta))
    quality = mmse_quality(user.beta, p0, b0, cfg, m1)
    return ChannelEstimate(shrink * least_squares, quality, user.beta)


def predict_csi(est: ChannelEstimate, rho: float, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("block index must be >= 1")
    return rho ** (n - 1) * est.h_hat


def prediction_error_variance(est: ChannelEstimate, rho: float, n: int) -> float:
    return est.beta - rho ** (2 * (n - 1)) * est.quality


def beamformers(h_hat: np.ndarray, qualities, scheme: str) -> np.ndarray:
    """Beamforming matrix (``L_t x Q``, one column per user).

    The columns are scaled by their expected norms, so ``E ||f||^2 = 1``
    rather than ``||f|| = 1`` per realization.  ``h_hat`` may carry leading
    batch axes.
    """
    scheme = _check_scheme(scheme)
    lt, q = h_hat.shape[-2:]
    lam = np.asarray(qualities, dtype=float)
    if scheme == "mrt":
        return h_hat / np.sqrt(lam * lt)
    if lt < q + 1:
        raise RankDeficientError("zero-forcing needs at least Q + 1 transmit antennas")
    gram = np.swapaxes(h_hat.conj(), -1, -2) @ h_hat
    if np.any(np.linalg.cond(gram) > 1e12):
        raise RankDeficientError("estimated channel matrix is rank deficient")
    a = h_hat @ np.linalg.inv(gram)
    return a * np.sqrt(lam * (lt - q))


def _aging(rho, n):
    return np.asarray(rho, dtype=float) ** (2 * (n - 1))


def gamma_closed_form(beta, rho, p0: float, b0: float, n: int, scheme: str, cfg: SystemConfig,
                      training_symbols: int | None = None):
    """Per-unit-power SINR of each user in block ``n`` (scalars or arrays)."""
    scheme = _check_scheme(scheme)
    if n < 1:
        raise ValueError("block index must be >= 1")
    m1 = cfg.training_symbols if training_symbols is None else training_symbols
    beta = np.asarray(beta, dtype=float)
    lt, q, power, noise = cfg.num_tx_antennas, cfg.num_users, cfg.total_power, cfg.user_noise_power
    r2 = _aging(rho, n)
    train = m1 * beta ** 2 * p0 * b0
    base = (power * beta + noise) * (lt * noise + m1 * beta * p0 * b0)
    if scheme == "mrt":
        out = r2 * train * lt / base
    else:
        denom = base - r2 * power * train
        if np.any(denom <= 0):
            raise InvalidRegimeError("zero-forcing SINR denominator is not positive")
        out = r2 * train * (lt - q) / denom
    return float(out) if out.ndim == 0 else out


class SinrMoments:
    """Sample moments behind the Monte Carlo SINR of a user population.

    Writing the estimate, estimation error and aging noise of user ``q`` as
    ``sqrt(lambda_q) z1``, ``sqrt(beta_q - lambda_q) z2`` and ``sqrt(beta_q) z3``
    with standard Gaussian ``z``, neither beamformer depends on ``lambda``
    (MRT is ``z1 / sqrt(L_t)``, ZF is ``sqrt(L_t - Q)`` times the pseudo-inverse
    columns of ``z1``).  The first and second moments of ``z_j^H f_i`` are
    therefore enough to evaluate the sample SINR for any training allocation
    and block index from the same draws.
    """

    def __init__(self, num_tx: int, num_users: int, scheme: str, num_draws: int,
                 rng: np.random.Generator, chunk: int = 5000):
        scheme = _check_scheme(scheme)
        if num_draws < 1000:
            raise ValueError("num_draws must be >= 1000")
        lt, q = num_tx, num_users
        self.scheme, self.num_draws = scheme, num_draws
        mean = np.zeros((3, q, q), dtype=complex)
        second = np.zeros((3, 3, q, q), dtype=complex)
        done = 0
        while done < num_draws:
            d = min(chunk, num_draws - done)
            z = complex_normal(rng, (3, d, lt, q))
            f = beamformers(z[0], np.ones(q), scheme)
            g = np.swapaxes(z.conj(), -1, -2) @ f  # g[j, d, q, i] = z_{j,q}^H f_i
            mean += g.sum(axis=1)
            gc = g.conj()
            for a in range(3):
                for b in range(a, 3):
                    second[a, b] += (gc[a] * g[b]).sum(axis=0)
            done += d
        for a in range(3):
            for b in range(a):
                second[a, b] = second[b, a].conj()
        self.mean = mean / num_draws
        self.second = second / num_draws

    def gamma(self, beta, rho, quality, n: int, noise: float, data_powers) -> np.ndarray:
        beta, rho, lam = (np.asarray(x, dtype=float) for x in (beta, rho, quality))
        decay = rho ** (n - 1)
        coef = np.stack([decay * np.sqrt(lam), decay * np.sqrt(np.maximum(beta - lam, 0.0)),
                         np.sqrt(1.0 - decay ** 2) * np.sqrt(beta)])  # (3, Q), row q of g
        first = np.einsum("aq,aqi->qi", coef, self.mean)
        sq = np.real(np.einsum("aq,bq,abqi->qi", coef, coef, self.second))
        powers = np.asarray(data_powers, dtype=float)
        signal = np.abs(np.diag(first)) ** 2
        self_var = np.diag(sq) - signal
        cross = sq @ powers - np.diag(sq) * powers
        return signal / (powers * self_var + cross + noise)


def gamma_monte_carlo(users: Sequence[CommUserModel], p0: float, b0: float, n: int, scheme: str,
                      num_draws: int, cfg: SystemConfig, rng: np.random.Generator,
                      data_powers=None, training_symbols: int | None = None) -> np.ndarray:
    """Sample-average SINR of every user, same normalization as the closed form.

    Evaluates ``|E h_q^H f_q|^2 / (p_q var(h_q^H f_q) + sum_{i != q} p_i E|h_q^H f_i|^2 + noise)``
    with the expectations replaced by averages over ``num_draws`` channel
    realizations.  ``data_powers`` defaults to ``P / Q`` per user.
    """
    q = len(users)
    if q != cfg.num_users:
        raise ValueError("number of users must match cfg.num_users")
    beta = np.array([u.beta for u in users])
    rho = np.array([u.rho for u in users])
    lam = np.atleast_1d(mmse_quality(beta, p0, b0, cfg, training_symbols))
    powers = np.full(q, cfg.total_power / q) if data_powers is None else data_powers
    moments = SinrMoments(cfg.num_tx_antennas, q, scheme, num_draws, rng)
    return moments.gamma(beta, rho, lam, n, cfg.user_noise_power, powers)


def prefactor(n: int, cfg: SystemConfig, training_symbols: int | None = None) -> float:
    """Fraction ``M'_n / M`` of the block carrying data."""
    m1 = cfg.training_symbols if training_symbols is None else training_symbols
    m = cfg.symbols_per_block
    return (m - m1) / m if n == 1 else 1.0


def rate(gamma, data_power, n: int, cfg: SystemConfig, training_symbols: int | None = None):
    data_power = np.asarray(data_power, dtype=float)
    if np.any(data_power < 0):
        raise ValueError("data power must be nonnegative")
    out = prefactor(n, cfg, training_symbols) * np.log2(1.0 + data_power * np.asarray(gamma))
    return float(out) if out.ndim == 0 else out


def total_rate(gamma, data_power, n: int, cfg: SystemConfig, training_symbols: int | None = None) -> float:
    return float(np.sum(rate(gamma, data_power, n, cfg, training_symbols)))


def asymptotic_rate(rho, fractions, n: int, scheme: str, cfg: SystemConfig,
                    training_symbols: int | None = None) -> float:
    """High-power limit of the block-``n`` total rate for power fractions ``kappa``."""
    scheme = _check_scheme(scheme)
    kappa = np.asarray(fractions, dtype=float)
    if np.any(kappa < 0) or not math.isclose(kappa.sum(), 1.0, rel_tol=1e-9):
        raise ValueError("power fractions must be nonnegative and sum to 1")
    r2 = np.broadcast_to(_aging(rho, n), kappa.shape)
    lt, q = cfg.num_tx_antennas, cfg.num_users
    if scheme == "mrt":
        snr = r2 * kappa * lt
    else:
        if n == 1 or np.any(r2 >= 1):
            raise InvalidRegimeError("zero-forcing rate is unbounded in power for this block")
        snr = r2 / (1 - r2) * kappa * (lt - q)
    return float(prefactor(n, cfg, training_symbols) * np.log2(1 + snr).sum())
