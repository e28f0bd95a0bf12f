import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dfrc_aging import allocation as al
from dfrc_aging.checker import check_solution
from dfrc_aging.config import SystemConfig, dbm_to_watt
from dfrc_aging.errors import InfeasibleError
from dfrc_aging.model import sample_scenario


@pytest.fixture
def problem(cfg):
    return al.AllocationProblem(sample_scenario(cfg, 2, 0), cfg)


def _log_utility(p, gamma):
    return np.sum(np.log2(1 + p * gamma))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.1, 100.0), min_size=3, max_size=3),
       st.lists(st.floats(0.0, 0.2), min_size=3, max_size=3))
def test_water_fill_beats_simplex_grid(gamma, floor_frac):
    gamma, total = np.array(gamma), 1.0
    floor = np.array(floor_frac) * total
    p = al.water_fill(gamma, floor, total)
    assert al.water_fill_kkt_residual(p, gamma, floor, total) < 1e-6
    step = total / 200
    best = -math.inf
    for i, j in itertools.product(range(201), repeat=2):
        x = np.array([i * step, j * step, total - (i + j) * step])
        if np.all(x >= floor - 1e-12):
            best = max(best, _log_utility(x, gamma))
    assert _log_utility(p, gamma) >= best - 1e-9


def test_water_fill_active_users_share_level():
    gamma = np.array([10.0, 2.0, 0.2])
    p = al.water_fill(gamma, np.zeros(3), 1.0)
    assert p[2] == 0.0
    assert p[0] + 1 / gamma[0] == pytest.approx(p[1] + 1 / gamma[1])
    assert p.sum() == pytest.approx(1.0)


def test_p2b_infeasible_names_user(cfg):
    with pytest.raises(InfeasibleError) as info:
        al.solve_p2b(np.array([1.0, 1e-6]), np.array([0.1, 5.0]), 2, cfg, 1.0)
    assert info.value.reason.constraint == "C4"
    assert info.value.reason.index == 2


def _grid_p2a(thr, total_power, total_band, points=400):
    """Brute force ``max p0 B0`` by scanning target bandwidths."""
    k = len(thr.linear)
    axes = [np.linspace(2.0, total_band - 1, points if k == 1 else 120) for _ in range(k)]
    best = 0.0
    for bands in itertools.product(*axes):
        bands = np.array(bands)
        power = [al._band_demand(b, a, d) for b, a, d in zip(bands, thr.linear, thr.distance)]
        p0, b0 = total_power - sum(power), total_band - bands.sum()
        if p0 > 0 and b0 > 0:
            best = max(best, p0 * b0)
    return best


@pytest.mark.parametrize("k", [1, 2])
def test_p2a_matches_grid_oracle(k):
    rng = np.random.default_rng(k)
    for _ in range(4):
        lin = rng.uniform(0.01, 0.08, k)
        dist = rng.uniform(0.5, 40.0, k)
        thr = al.TrackingThresholds(lin, dist, 1)
        sol = al.solve_p2a(thr, 1.0, 64)
        grid = _grid_p2a(thr, 1.0, 64)
        assert sol.p0b0 >= grid * (1 - 1e-9)
        assert sol.p0b0 <= grid * 1.01
        assert al.p2a_kkt_residual(sol, thr) < 1e-6


def test_p2a_kkt_many_targets():
    rng = np.random.default_rng(11)
    for _ in range(10):
        thr = al.TrackingThresholds(rng.uniform(1e-3, 0.05, 4), rng.uniform(0.1, 20.0, 4), 1)
        sol = al.solve_p2a(thr, 1.0, 64)
        assert al.p2a_kkt_residual(sol, thr) < 1e-6
        assert al.radar_feasible(thr, sol.power, sol.band) is None
        assert sol.power.sum() == pytest.approx(1.0)
        assert sol.band.sum() == pytest.approx(64.0)


def test_p2a_reports_resource_shortage():
    thr = al.TrackingThresholds(np.array([40.0, 40.0]), np.array([1.0, 1.0]), 1)
    with pytest.raises(InfeasibleError):
        al.solve_p2a(thr, 1.0, 64)


def test_integer_conversion():
    out = al.integer_conversion(np.array([40.3, 5.2, 3.0 - 1e-12, 15.5]), 64)
    assert out.tolist() == [39.0, 6.0, 3.0, 16.0]
    with pytest.raises(InfeasibleError):
        al.integer_conversion(np.array([0.5, 30.5, 33.1]), 64)


def test_thresholds_become_infeasible_for_long_intervals(problem):
    with pytest.raises(InfeasibleError) as info:
        al.tracking_thresholds(problem, 100)
    assert info.value.reason.constraint in ("C1", "C2", "C3")


@pytest.mark.parametrize("kind", al.SCHEMES_ALL)
@pytest.mark.parametrize("cs", ["mrt", "zf"])
def test_solutions_pass_independent_checker(cfg, kind, cs):
    c = SystemConfig(total_power=dbm_to_watt(5.0))
    for trial in range(3):
        prob = al.AllocationProblem(sample_scenario(c, 4, trial), c)
        sol = al.solve(prob, cs, kind)
        if sol.feasible:
            report = check_solution(prob, sol)
            assert report.ok, report.violations


def test_forced_first_block_equals_no_aging(problem):
    forced = al.solve(problem, "mrt", "proposed", intervals=[1])
    baseline = al.solve(problem, "mrt", "no_aging")
    assert forced.objective == baseline.objective
    assert np.array_equal(forced.training_band, baseline.training_band)


def test_scheme_ordering_on_one_scenario(problem):
    res = {k: al.solve(problem, "mrt", k) for k in al.SCHEMES_ALL}
    up, prop = res["upper_bound"].objective, res["proposed"].objective
    assert up >= prop - 1e-9
    assert prop >= res["no_aging"].objective - 1e-9
    assert prop >= res["bench1"].objective - 1e-9


def test_horizon_bound_covers_feasible_intervals(cfg):
    for trial in range(5):
        prob = al.AllocationProblem(sample_scenario(cfg, 5, trial), cfg)
        for cs in ("mrt", "zf"):
            bound = al.n_max(prob, cs)
            limit = int(min(bound + 5, prob.max_blocks))
            assert bound >= al.feasible_interval_scan(prob, cs, limit)


def test_starved_power_is_infeasible():
    c = SystemConfig(total_power=1e-9)
    prob = al.AllocationProblem(sample_scenario(c, 2, 0), c)
    sol = al.solve(prob, "mrt", "proposed")
    assert not sol.feasible
    assert sol.reason.constraint in ("C1", "C2", "C3", "C4")


def test_solution_serialization(problem):
    sol = al.solve(problem, "mrt", "proposed")
    rec = sol.to_record()
    assert rec["N"] == sol.num_blocks
    assert len(rec["data_power"]) == sol.num_blocks
    rows = al.solution_rows(sol)
    assert rows[0] == {"field": "N", "index": "", "value": sol.num_blocks}
