"""Re-estimation interval, training and data power/bandwidth allocation.

The joint problem is split into

* a training problem: maximize ``p0 * B0`` subject to every target's aged
  tracking bounds, ``sum p <= P`` and ``sum B <= B``;
* a data problem per block: water-filling over users subject to their
  minimum rates, ``sum p~ <= P``;

and an outer one-dimensional search over the interval ``N``.  Subcarrier
counts are continuous during the search (``B_k >= 2`` for targets, the
smallest count for which the distance bound exists) and rounded afterwards.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from . import comm
from .bounds import aging_coefficients, crlb_constants, predict_trajectory
from .config import ScenarioParams, SystemConfig
from .errors import GeometryError, InfeasibleError, Infeasibility
from .model import Scenario, TargetState, tracking_limits

MIN_TARGET_BAND = 2.0
MAX_BLOCKS = 200
SCHEMES_ALL = ("proposed", "upper_bound", "bench1", "bench2", "bench3", "no_aging")


@dataclass(frozen=True)
class ConstraintSet:
    """Tracking limits (rows: targets; columns: angle, distance, velocity) and rate floors."""

    gamma_max: np.ndarray
    min_rates: np.ndarray
    total_power: float
    total_subcarriers: int

    def __post_init__(self):
        if np.any(self.gamma_max <= 0) or self.total_power <= 0 or self.total_subcarriers <= 0:
            raise ValueError("constraint levels must be positive")
        if np.any(self.min_rates < 0):
            raise ValueError("minimum rates must be nonnegative")


def constraints_from_scenario(scenario: Scenario, cfg: SystemConfig,
                              params: ScenarioParams = ScenarioParams()) -> ConstraintSet:
    gamma = np.array([tracking_limits(t, params) for t in scenario.targets])
    rates = np.array([u.min_rate for u in scenario.users])
    return ConstraintSet(gamma, rates, cfg.total_power, cfg.total_subcarriers)


class AllocationProblem:
    """Scenario-dependent quantities shared by every candidate interval.

    The targets are taken as the block-1 estimates; their noise-free
    predicted trajectories feed the angle aging coefficients.
    """

    def __init__(self, scenario: Scenario, cfg: SystemConfig,
                 constraints: ConstraintSet | None = None,
                 params: ScenarioParams = ScenarioParams(), max_blocks: int = MAX_BLOCKS):
        self.scenario = scenario
        self.cfg = cfg
        self.params = params
        self.constraints = constraints or constraints_from_scenario(scenario, cfg, params)
        self.targets: tuple[TargetState, ...] = scenario.targets
        self.users = scenario.users
        self.max_blocks = max_blocks
        self.sigmas = np.array([crlb_constants(t, cfg) for t in self.targets])
        self.beta = np.array([u.beta for u in self.users])
        self.rho = np.array([u.rho for u in self.users])
        self._coeffs: dict[int, np.ndarray] = {}

    @property
    def num_targets(self) -> int:
        return len(self.targets)

    def coefficients(self, k: int, num_blocks: int) -> np.ndarray:
        """``(a_n, b_n)`` for blocks ``1..num_blocks`` of target ``k`` (0-based)."""
        cached = self._coeffs.get(k)
        if cached is None or len(cached) < num_blocks:
            length = max(num_blocks, 16 if cached is None else 2 * len(cached))
            length = min(max(length, num_blocks), self.max_blocks)
            traj = predict_trajectory(self.targets[k], self.cfg.block_duration, length)
            cached = np.array([aging_coefficients(traj, self.cfg.block_duration, n)
                               for n in range(1, length + 1)])
            self._coeffs[k] = cached
        return cached[:num_blocks]


@dataclass
class AllocationSolution:
    scheme: str
    comm_scheme: str
    num_blocks: int
    training_power: np.ndarray  # (K + 1,), index 0 is the communication band
    training_band: np.ndarray  # (K + 1,)
    data_power: np.ndarray  # (N, Q)
    objective: float
    integer: bool
    feasible: bool = True
    reason: Infeasibility | None = None
    curve: dict = field(default_factory=dict)  # N -> objective of the evaluated candidates

    @property
    def p0b0(self) -> float:
        return float(self.training_power[0] * self.training_band[0])

    def to_record(self) -> dict:
        return {
            "scheme": self.scheme,
            "comm_scheme": self.comm_scheme,
            "feasible": self.feasible,
            "reason": None if self.reason is None else str(self.reason),
            "N": self.num_blocks,
            "integer": self.integer,
            "objective": self.objective,
            "training_power": [float(x) for x in self.training_power],
            "training_band": [float(x) for x in self.training_band],
            "data_power": [[float(x) for x in row] for row in self.data_power],
            "curve": {str(k): v for k, v in self.curve.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def infeasible_solution(scheme: str, comm_scheme: str, reason: Infeasibility, curve=None) -> AllocationSolution:
    return AllocationSolution(scheme, comm_scheme, 0, np.array([]), np.array([]),
                              np.zeros((0, 0)), float("nan"), False, feasible=False,
                              reason=reason, curve=curve or {})


# ---------------------------------------------------------------- horizon


def n_max(problem: AllocationProblem, comm_scheme: str) -> float:
    """Largest interval that could be feasible; ``0`` if none, ``inf`` if unbounded.

    Assumes all power and bandwidth serve each target (radar side) or the
    communication band (user side), so the result is an upper bound.
    """
    return n_max_binding(problem, comm_scheme)[0]


def n_max_binding(problem: AllocationProblem, comm_scheme: str) -> tuple[float, Infeasibility | None]:
    """:func:`n_max` together with the constraint that sets it."""
    cfg, cons = problem.cfg, problem.constraints
    power, band, m1 = cons.total_power, cons.total_subcarriers, cfg.training_symbols
    best, binding = math.inf, None

    def tighten(value, reason):
        nonlocal best, binding
        if value < best:
            best, binding = value, reason

    for k, t in enumerate(problem.targets):
        _, s_d, s_v = problem.sigmas[k]
        g_d, g_v = cons.gamma_max[k, 1], cons.gamma_max[k, 2]
        term_d = g_d / t.distance_var - s_d / (t.distance_var * power * band * m1 * (band ** 2 - 1))
        term_v = g_v / t.velocity_var - s_v / (t.velocity_var * power * band * m1 * (m1 ** 2 - 1))
        tighten(1 + math.floor(term_d), Infeasibility("C2", k + 1, None, "distance bound"))
        tighten(1 + math.floor(term_v), Infeasibility("C3", k + 1, None, "velocity bound"))
    scheme = comm._check_scheme(comm_scheme)
    lt, q, noise = cfg.num_tx_antennas, cfg.num_users, cfg.user_noise_power
    for idx, u in enumerate(problem.users):
        if u.rho >= 1.0:
            continue
        if u.rho <= 0.0:
            tighten(1, Infeasibility("C4", idx + 1, None, "rate requirement"))
            continue
        need = 2.0 ** cons.min_rates[idx] - 1.0
        psi2 = (power * u.beta + noise) * (lt * noise + m1 * u.beta * power * band)
        if scheme == "mrt":
            psi1 = m1 * u.beta ** 2 * power ** 2 * band * lt
            arg = need * psi2 / psi1
        else:
            psi1 = m1 * u.beta ** 2 * power ** 2 * band * (lt - q)
            psi3 = m1 * u.beta ** 2 * power ** 2 * band
            arg = need * psi2 / (psi1 + need * psi3)
        if arg <= 0:
            continue
        tighten(math.floor(math.log(arg) / (2 * math.log(u.rho))) + 1,
                Infeasibility("C4", idx + 1, None, "rate requirement"))
    return (0 if best < 1 else best), binding


# ---------------------------------------------------------------- thresholds


@dataclass(frozen=True)
class TrackingThresholds:
    """Per-target lower bounds on ``p_k B_k`` and ``p_k B_k (B_k^2 - 1)``."""

    linear: np.ndarray
    distance: np.ndarray
    num_blocks: int


def tracking_thresholds(problem: AllocationProblem, num_blocks: int) -> TrackingThresholds:
    if num_blocks < 1:
        raise ValueError("interval must be >= 1")
    cfg, cons = problem.cfg, problem.constraints
    m1 = cfg.training_symbols
    lin, dist = [], []
    for k, t in enumerate(problem.targets):
        s_a, s_d, s_v = problem.sigmas[k]
        g_a, g_d, g_v = cons.gamma_max[k]
        ab = problem.coefficients(k, num_blocks)
        room_a = g_a - ab[:, 1] * t.angle_var
        bad = np.nonzero(room_a <= 0)[0]
        if bad.size:
            raise InfeasibleError(Infeasibility("C1", k + 1, int(bad[0]) + 1,
                                                "angle evolution noise alone exceeds the limit"))
        room_d = g_d - (num_blocks - 1) * t.distance_var
        if room_d <= 0:
            raise InfeasibleError(Infeasibility("C2", k + 1, num_blocks,
                                                "distance evolution noise alone exceeds the limit"))
        room_v = g_v - (num_blocks - 1) * t.velocity_var
        if room_v <= 0:
            raise InfeasibleError(Infeasibility("C3", k + 1, num_blocks,
                                                "velocity evolution noise alone exceeds the limit"))
        if math.isinf(s_v):
            raise InfeasibleError(Infeasibility("C3", k + 1, 1, "tangential motion"))
        angle_term = np.max(ab[:, 0] * s_a / (room_a * m1))
        vel_term = s_v / (m1 * (m1 ** 2 - 1) * room_v)
        lin.append(max(angle_term, vel_term))
        dist.append(s_d / (m1 * room_d))
    return TrackingThresholds(np.array(lin), np.array(dist), num_blocks)


# ---------------------------------------------------------------- training problem


def _band_demand(band, c_lin, c_dist):
    """Smallest power meeting both thresholds with ``band`` subcarriers."""
    return max(c_lin / band, c_dist / (band * (band * band - 1)))


def _dist_slope(band, c_dist):
    x = band * (band * band - 1)
    return -c_dist * (3 * band * band - 1) / (x * x)


def _best_band(nu, c_lin, c_dist, cap):
    """``argmin_B demand(B) + nu B`` over ``[2, cap]``."""
    kink = math.sqrt(1.0 + c_dist / c_lin)
    if kink > MIN_TARGET_BAND and _dist_slope(kink, c_dist) + nu > 0:
        # stationary point lies in the distance-limited region
        if _dist_slope(MIN_TARGET_BAND, c_dist) + nu >= 0:
            return MIN_TARGET_BAND
        return optimize.brentq(lambda b: _dist_slope(b, c_dist) + nu, MIN_TARGET_BAND, kink,
                               xtol=1e-14, rtol=4 * np.finfo(float).eps)
    band = max(math.sqrt(c_lin / nu), kink)
    return min(max(band, MIN_TARGET_BAND), cap)


@dataclass(frozen=True)
class TrainingSolution:
    power: np.ndarray  # (K + 1,)
    band: np.ndarray  # (K + 1,)
    multiplier: float

    @property
    def p0b0(self) -> float:
        return float(self.power[0] * self.band[0])


def _training_at(nu, thr: TrackingThresholds, total_power, total_band):
    bands = np.array([_best_band(nu, a, d, total_band) for a, d in zip(thr.linear, thr.distance)])
    powers = np.array([_band_demand(b, a, d) for b, a, d in zip(bands, thr.linear, thr.distance)])
    return bands, powers, total_power - powers.sum(), total_band - bands.sum()


def solve_p2a(thr: TrackingThresholds, total_power: float, total_band: float,
              max_iter: int = 400) -> TrainingSolution:
    """Optimal continuous training allocation (maximizes ``log p0 + log B0``).

    For a multiplier ``nu`` each target takes the bandwidth minimizing its
    power demand plus ``nu`` times its bandwidth; stationarity of the reduced
    concave problem requires ``nu = p0 / B0``, which is monotone in ``nu``
    and located by bisection (log scale) followed by Brent's method.
    """
    k = len(thr.linear)
    if k == 0:
        return TrainingSolution(np.array([total_power]), np.array([float(total_band)]), 0.0)

    def status(log_nu):
        bands, powers, p0, b0 = _training_at(math.exp(log_nu), thr, total_power, total_band)
        if p0 <= 0 and b0 <= 0:
            return 0, None
        if b0 <= 0:
            return -1, None
        if p0 <= 0:
            return 1, None
        value = log_nu - math.log(p0) + math.log(b0)
        return (1 if value > 0 else -1), value

    centre = math.log(total_power / total_band)
    lo, hi = centre - 80.0, centre + 80.0
    lo_valid = hi_valid = False
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        sign, value = status(mid)
        if sign == 0:
            # neither constraint can be met together: demand exceeds resources
            break
        if value is not None and value == 0:
            lo = hi = mid
            lo_valid = hi_valid = True
            break
        if sign < 0:
            lo, lo_valid = mid, value is not None
        else:
            hi, hi_valid = mid, value is not None
        if lo_valid and hi_valid:
            break
        if hi - lo < 1e-13:
            break
    if not (lo_valid and hi_valid):
        mid = 0.5 * (lo + hi)
        _, value = status(mid)
        if value is None:
            raise InfeasibleError(Infeasibility("resources", None, None,
                                                "training budget cannot meet the tracking demand"))
        lo = hi = mid
    if hi > lo:
        def f(log_nu):
            return status(log_nu)[1]
        log_nu = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    else:
        log_nu = lo
    nu = math.exp(log_nu)
    bands, powers, p0, b0 = _training_at(nu, thr, total_power, total_band)
    return TrainingSolution(np.concatenate([[p0], powers]), np.concatenate([[b0], bands]), nu)


def p2a_kkt_residual(sol: TrainingSolution, thr: TrackingThresholds) -> float:
    """Largest relative violation of the stationarity conditions."""
    p0, b0 = sol.power[0], sol.band[0]
    nu = p0 / b0
    worst = abs(sol.multiplier - nu) / nu
    for band, c_lin, c_dist in zip(sol.band[1:], thr.linear, thr.distance):
        lin_slope = -c_lin / band ** 2
        d_slope = _dist_slope(band, c_dist)
        lin_val, d_val = c_lin / band, c_dist / (band * (band ** 2 - 1))
        if math.isclose(lin_val, d_val, rel_tol=1e-9):
            left, right = d_slope, lin_slope
        elif lin_val > d_val:
            left = right = lin_slope
        else:
            left = right = d_slope
        # -g' must contain nu; at the lower bound only -g'_right <= nu is needed
        low_gap = max(0.0, -right - nu)
        high_gap = 0.0 if band <= MIN_TARGET_BAND * (1 + 1e-12) else max(0.0, nu - (-left))
        worst = max(worst, max(low_gap, high_gap) / nu)
    return worst


def radar_feasible(thr: TrackingThresholds, power: np.ndarray, band: np.ndarray,
                   rtol: float = 1e-9) -> Infeasibility | None:
    for k, (p, b) in enumerate(zip(power[1:], band[1:])):
        if b < MIN_TARGET_BAND - 1e-12:
            return Infeasibility("C2", k + 1, 1, "fewer than two subcarriers")
        if p * b < thr.linear[k] * (1 - rtol):
            return Infeasibility("C1", k + 1, None, "angle/velocity tracking limit")
        if p * b * (b * b - 1) < thr.distance[k] * (1 - rtol):
            return Infeasibility("C2", k + 1, thr.num_blocks, "distance tracking limit")
    return None


# ---------------------------------------------------------------- data problem


def min_data_power(gamma, min_rates, n: int, cfg: SystemConfig) -> np.ndarray:
    pre = comm.prefactor(n, cfg)
    return (2.0 ** (np.asarray(min_rates) / pre) - 1.0) / np.asarray(gamma)


def water_fill(gamma: np.ndarray, floor: np.ndarray, total: float, tol: float = 1e-9) -> np.ndarray:
    """``p_q = max(floor_q, w - 1/gamma_q)`` with the level ``w`` set so ``sum p = total``."""
    inv = 1.0 / gamma

    def spent(level):
        return np.maximum(floor, level - inv).sum()

    lo = float(np.min(inv + floor))
    hi = float(np.max(inv + floor)) + total
    # bisection on the level, then exact solve on the identified active set
    while hi - lo > tol * max(total, 1e-300) and hi > lo:
        mid = 0.5 * (lo + hi)
        if spent(mid) > total:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * abs(hi):
            break
    level = 0.5 * (lo + hi)
    active = level - inv > floor
    if np.any(active):
        level = (total - floor[~active].sum() + inv[active].sum()) / active.sum()
    return np.maximum(floor, level - inv)


def water_fill_kkt_residual(powers: np.ndarray, gamma: np.ndarray, floor: np.ndarray,
                            total: float) -> float:
    """Relative violation of the optimality conditions of ``max sum log(1 + p gamma)``.

    Users above their floor share one marginal utility ``mu``; users at the
    floor may not have a larger one.
    """
    powers, gamma, floor = (np.asarray(x, dtype=float) for x in (powers, gamma, floor))
    marginal = gamma / (1.0 + powers * gamma)
    budget = abs(powers.sum() - total) / total
    lower = max(0.0, float(np.max(floor - powers)) / total)
    active = powers > floor * (1 + 1e-9) + 1e-15 * total
    if not np.any(active):
        return max(budget, lower)
    mu = marginal[active].mean()
    spread = float(np.max(np.abs(marginal[active] - mu))) / mu
    excess = float(np.max(np.maximum(marginal[~active] - mu, 0.0), initial=0.0)) / mu
    return max(budget, lower, spread, excess)


def solve_p2b(gamma: np.ndarray, min_rates, n: int, cfg: SystemConfig,
              total_power: float | None = None) -> np.ndarray:
    """Rate-maximizing data powers of one block."""
    total = cfg.total_power if total_power is None else total_power
    floor = min_data_power(gamma, min_rates, n, cfg)
    if floor.sum() > total:
        worst = int(np.argmax(floor))
        raise InfeasibleError(Infeasibility("C4", worst + 1, n, "minimum rates exceed the power budget"))
    return water_fill(np.asarray(gamma, dtype=float), floor, total)


def block_gammas(problem: AllocationProblem, p0b0: float, num_blocks: int, comm_scheme: str) -> np.ndarray:
    """Closed-form per-unit-power SINRs, shape ``(N, Q)``."""
    return np.array([comm.gamma_closed_form(problem.beta, problem.rho, p0b0, 1.0, n,
                                            comm_scheme, problem.cfg)
                     for n in range(1, num_blocks + 1)])


def average_rate(gammas: np.ndarray, powers: np.ndarray, cfg: SystemConfig) -> float:
    n_blocks = gammas.shape[0]
    return sum(comm.total_rate(gammas[n], powers[n], n + 1, cfg) for n in range(n_blocks)) / n_blocks


def data_allocation(problem: AllocationProblem, p0b0: float, num_blocks: int, comm_scheme: str,
                    uniform: bool = False) -> tuple[np.ndarray, float]:
    """Data powers for every block and the resulting average total rate."""
    cfg, cons = problem.cfg, problem.constraints
    gammas = block_gammas(problem, p0b0, num_blocks, comm_scheme)
    q = len(problem.users)
    powers = np.empty_like(gammas)
    for n in range(num_blocks):
        if uniform:
            powers[n] = cons.total_power / q
            rates = comm.rate(gammas[n], powers[n], n + 1, cfg)
            short = np.nonzero(rates < cons.min_rates * (1 - 1e-12))[0]
            if short.size:
                raise InfeasibleError(Infeasibility("C4", int(short[0]) + 1, n + 1,
                                                    "uniform power misses the minimum rate"))
        else:
            powers[n] = solve_p2b(gammas[n], cons.min_rates, n + 1, cfg, cons.total_power)
    return powers, average_rate(gammas, powers, cfg)


# ---------------------------------------------------------------- integer conversion


def integer_conversion(band: np.ndarray, total_band: int) -> np.ndarray:
    """Round target bands up and give the remaining subcarriers to the communication band."""
    band = np.asarray(band, dtype=float)
    # tolerate floating noise on values that are already integers
    targets = np.ceil(band[1:] - 1e-9)
    b0 = total_band - targets.sum()
    if b0 < 1:
        raise InfeasibleError(Infeasibility("B0", 0, None, "no subcarrier left for channel training"))
    return np.concatenate([[b0], targets])


# ---------------------------------------------------------------- search


def _pick(candidates: dict[int, tuple[float, object]]):
    """Interval with the largest objective; ties within 1e-9 go to the smaller interval."""
    best_n, best_val = None, -math.inf
    for n in sorted(candidates):
        val = candidates[n][0]
        if best_n is None or val > best_val + 1e-9 * max(1.0, abs(best_val)):
            best_n, best_val = n, val
    return best_n


def _search_limit(problem: AllocationProblem, comm_scheme: str) -> int:
    limit = n_max(problem, comm_scheme)
    return int(min(limit, problem.max_blocks))


def _interval_candidates(problem, comm_scheme, intervals, evaluate):
    candidates, first_reason = {}, None
    for n in intervals:
        try:
            candidates[n] = evaluate(n)
        except InfeasibleError as exc:
            first_reason = first_reason or exc.reason
    return candidates, first_reason


def _relaxed(problem, comm_scheme, n):
    thr = tracking_thresholds(problem, n)
    train = solve_p2a(thr, problem.constraints.total_power, problem.constraints.total_subcarriers)
    return thr, train


def _evaluate(problem, comm_scheme, n, kind):
    cons = problem.constraints
    if kind in ("bench2", "bench3"):
        thr = tracking_thresholds(problem, n)
        power, band = uniform_training(problem)
        reason = radar_feasible(thr, power, band)
        if reason is not None:
            raise InfeasibleError(reason)
        integer = True
    else:
        thr, train = _relaxed(problem, comm_scheme, n)
        power, band = train.power, train.band
        integer = kind != "upper_bound"
        if integer:
            band = integer_conversion(band, cons.total_subcarriers)
    uniform_data = kind in ("bench1", "bench3")
    data, objective = data_allocation(problem, power[0] * band[0], n, comm_scheme, uniform=uniform_data)
    return objective, (power, band, data, integer)


def solve(problem: AllocationProblem, comm_scheme: str = "mrt", kind: str = "proposed",
          intervals: Sequence[int] | None = None) -> AllocationSolution:
    """Best allocation of one scheme over the candidate intervals.

    ``kind``: ``upper_bound`` (continuous bandwidths), ``proposed`` (rounded
    bandwidths, interval chosen after rounding), ``bench1`` (optimized
    training, equal data power), ``bench2`` (equal training split,
    water-filled data), ``bench3`` (equal everything) or ``no_aging``
    (proposed with ``N = 1``).
    """
    if kind not in SCHEMES_ALL:
        raise ValueError(f"kind must be one of {SCHEMES_ALL}")
    comm_scheme = comm._check_scheme(comm_scheme)
    if intervals is None:
        if kind == "no_aging":
            intervals = [1]
        else:
            limit = _search_limit(problem, comm_scheme)
            if limit < 1:
                _, why = n_max_binding(problem, comm_scheme)
                detail = f"{why.detail} rules out every interval"
                return infeasible_solution(kind, comm_scheme,
                                           Infeasibility(why.constraint, why.index, None, detail))
            intervals = range(1, limit + 1)
    key = "proposed" if kind == "no_aging" else kind
    candidates, reason = _interval_candidates(problem, comm_scheme, intervals,
                                              lambda n: _evaluate(problem, comm_scheme, n, key))
    curve = {n: v[0] for n, v in candidates.items()}
    if not candidates:
        return infeasible_solution(kind, comm_scheme, reason, curve)
    best = _pick(candidates)
    objective, (power, band, data, integer) = candidates[best]
    return AllocationSolution(kind, comm_scheme, best, power, band, data, objective, integer,
                              curve=curve)


def algorithm1(problem: AllocationProblem, comm_scheme: str = "mrt") -> AllocationSolution:
    """One-dimensional interval search on the continuous problem."""
    return solve(problem, comm_scheme, "upper_bound")


def proposed(problem: AllocationProblem, comm_scheme: str = "mrt") -> AllocationSolution:
    return solve(problem, comm_scheme, "proposed")


def baselines(problem: AllocationProblem, comm_scheme: str, which: str) -> AllocationSolution:
    return solve(problem, comm_scheme, which)


def uniform_training(problem: AllocationProblem) -> tuple[np.ndarray, np.ndarray]:
    k = problem.num_targets
    cons = problem.constraints
    power = np.full(k + 1, cons.total_power / (k + 1))
    share = cons.total_subcarriers // (k + 1)
    band = np.full(k + 1, float(share))
    band[0] = cons.total_subcarriers - k * share
    return power, band


def feasible_interval_scan(problem: AllocationProblem, comm_scheme: str, limit: int) -> int:
    """Largest interval for which the continuous problem is feasible (0 if none)."""
    best = 0
    for n in range(1, limit + 1):
        try:
            thr, train = _relaxed(problem, comm_scheme, n)
            data_allocation(problem, train.p0b0, n, comm_scheme)
        except InfeasibleError:
            continue
        best = n
    return best


def solution_rows(sol: AllocationSolution) -> list[dict]:
    """Flat ``field, index, value`` records for CSV output."""
    rows = [{"field": "N", "index": "", "value": sol.num_blocks},
            {"field": "objective", "index": "", "value": sol.objective},
            {"field": "feasible", "index": "", "value": int(sol.feasible)}]
    for i, p in enumerate(sol.training_power):
        rows.append({"field": "training_power", "index": i, "value": float(p)})
    for i, b in enumerate(sol.training_band):
        rows.append({"field": "training_band", "index": i, "value": float(b)})
    for n, row in enumerate(sol.data_power):
        for q, p in enumerate(row):
            rows.append({"field": "data_power", "index": f"{n + 1}:{q + 1}", "value": float(p)})
    return rows
