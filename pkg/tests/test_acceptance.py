"""Acceptance criteria 1-12. Each test records a one-line verdict that is
printed in the terminal summary (and to stdout with ``-s``)."""

import itertools
import math
import time

import numpy as np
import pytest

from dfrc_aging import allocation as al
from dfrc_aging import comm
from dfrc_aging import experiments as ex
from dfrc_aging.bounds import (aged_covariance_exact, aged_crlb_approx, crlb_block1, fisher_oracle,
                               predict_trajectory)
from dfrc_aging.config import SystemConfig, dbm_to_watt
from dfrc_aging.model import TargetState, sample_scenario

from conftest import ACCEPTANCE_LINES


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_c01_crlb_matches_fisher_inversion():
    cfg = SystemConfig()
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        while True:
            s = TargetState(angle=rng.uniform(-1.2, 1.2), distance=rng.uniform(50, 500),
                            velocity=rng.uniform(1, 60), heading=rng.uniform(0, 2 * math.pi))
            if abs(math.cos(s.relative_angle)) > 0.05:
                break
        power, band = dbm_to_watt(rng.uniform(-20, 20)), int(rng.integers(2, 41))
        closed = crlb_block1(s, power, band, cfg).diag
        oracle = fisher_oracle(s, power, band, cfg.training_symbols, cfg)
        worst = max(worst, float(np.max(np.abs(closed - oracle) / oracle)))
    elapsed = time.perf_counter() - start
    report(1, worst <= 1e-6 and elapsed < 5, f"max rel err {worst:.2e}, {elapsed:.2f}s")


def test_c02_estimator_efficiency_at_top_power():
    start = time.perf_counter()
    spec = ex.default_spec("fig4", trials=200)
    table = ex.run_experiment(spec)
    top = max(spec.grid)
    ratios = {}
    for name in ex.PARAMS3:
        row = table.select(sweep_value=top, scheme="N=1", metric=f"rmse_{name}")[0]
        ratios[name] = row.mean / row.theory
    elapsed = time.perf_counter() - start
    ok = all(1.0 <= r <= 3.0 for r in ratios.values()) and elapsed < 600
    detail = ", ".join(f"{k} {v:.3f}" for k, v in ratios.items())
    report(2, ok, f"RMSE/sqrt(CRLB) at {top:g} dBm: {detail}; {elapsed:.0f}s")


def test_c03_aged_bound_approximation():
    cfg = SystemConfig()
    start = time.perf_counter()
    worst = 0.0
    for trial in range(50):
        scen = sample_scenario(cfg, 303, trial)
        power = cfg.total_power / (cfg.num_targets + 1)
        band = cfg.total_subcarriers // (cfg.num_targets + 1)
        for t in scen.targets:
            c1 = crlb_block1(t, power, band, cfg)
            traj = predict_trajectory(t, cfg.block_duration, 10)
            for n in range(1, 11):
                exact = aged_covariance_exact(c1, traj, t.evolution_cov, n, cfg.block_duration).diag
                approx = aged_crlb_approx(c1, traj, t.evolution_cov, n, cfg.block_duration).diag
                worst = max(worst, float(np.max(np.abs(approx - exact) / exact)))
    elapsed = time.perf_counter() - start
    report(3, worst <= 0.05 and elapsed < 10, f"max rel gap {worst:.2e}, {elapsed:.2f}s")


def test_c04_rate_closed_form_vs_monte_carlo():
    cfg = SystemConfig()
    users = sample_scenario(cfg, 404, 0).users
    beta = np.array([u.beta for u in users])
    rho = np.array([u.rho for u in users])
    powers = np.full(cfg.num_users, cfg.total_power / cfg.num_users)
    p0, b0 = cfg.total_power / (cfg.num_targets + 1), 16
    lam = comm.mmse_quality(beta, p0, b0, cfg)
    start = time.perf_counter()
    worst = 0.0
    for scheme in comm.SCHEMES:
        moments = comm.SinrMoments(cfg.num_tx_antennas, cfg.num_users, scheme, 100_000,
                                   np.random.default_rng(4040))
        for n in (1, 2, 5, 10):
            sim = moments.gamma(beta, rho, lam, n, cfg.user_noise_power, powers)
            closed = comm.gamma_closed_form(beta, rho, p0, b0, n, scheme, cfg)
            r_sim, r_closed = comm.rate(sim, powers, n, cfg), comm.rate(closed, powers, n, cfg)
            worst = max(worst, float(np.max(np.abs(r_closed - r_sim) / r_sim)))
    elapsed = time.perf_counter() - start
    report(4, worst <= 0.03 and elapsed < 120, f"max per-user rate gap {worst:.2%}, {elapsed:.1f}s")


def test_c05_rates_bounded_by_asymptotes():
    spec = ex.default_spec("fig5", trials=20, draws=5000)
    table = ex.run_experiment(spec)
    worst_excess = -math.inf
    for row in table.select(metric="rate"):
        limits = table.select(sweep_value=row.sweep_value, scheme=row.scheme, metric="asymptote")
        if limits and limits[0].trials:
            worst_excess = max(worst_excess, (row.mean - limits[0].mean) / limits[0].mean,
                               (row.theory - limits[0].mean) / limits[0].mean)
    top = max(spec.grid)
    gaps = []
    for n in spec.blocks:
        rate = table.value(sweep_value=top, scheme=f"mrt_n{n}", metric="rate")
        limit = table.value(sweep_value=top, scheme=f"mrt_n{n}", metric="asymptote")
        gaps.append((limit - rate) / limit)
    ok = worst_excess <= 0 and max(gaps) <= 0.02
    report(5, ok, f"largest excess over limit {worst_excess:.2%}, "
                  f"MRT gap at {top:g} dBm {max(gaps):.2%}")


def test_c06_water_filling_optimality():
    rng = np.random.default_rng(606)
    start = time.perf_counter()
    worst_gap, worst_kkt = 0.0, 0.0
    total, step = 1.0, 1.0 / 200
    cand = np.array([(i, j) for i, j in itertools.product(range(201), repeat=2) if i + j <= 200]) * step
    cand = np.column_stack([cand, total - cand.sum(axis=1)])
    for _ in range(50):
        gamma = 10.0 ** rng.uniform(-1, 2, 3)
        floor = rng.uniform(0, 0.15, 3) * total
        p = al.water_fill(gamma, floor, total)
        worst_kkt = max(worst_kkt, al.water_fill_kkt_residual(p, gamma, floor, total))
        ok_rows = np.all(cand >= floor - 1e-12, axis=1)
        grid = np.max(np.sum(np.log2(1 + cand[ok_rows] * gamma), axis=1))
        value = np.sum(np.log2(1 + p * gamma))
        worst_gap = max(worst_gap, (grid - value) / grid)
    elapsed = time.perf_counter() - start
    ok = worst_gap <= 0.005 and worst_kkt < 1e-6 and elapsed < 30
    report(6, ok, f"grid minus solver {worst_gap:.2e} (relative), KKT {worst_kkt:.2e}, {elapsed:.2f}s")


def _grid_p0b0(thr, total_power, total_band):
    k = len(thr.linear)
    axis = np.linspace(al.MIN_TARGET_BAND, total_band - 1, 2000 if k == 1 else 300)
    best = 0.0
    for bands in itertools.product(axis, repeat=k):
        bands = np.array(bands)
        power = sum(al._band_demand(b, a, d) for b, a, d in zip(bands, thr.linear, thr.distance))
        p0, b0 = total_power - power, total_band - bands.sum()
        if p0 > 0 and b0 > 0:
            best = max(best, p0 * b0)
    return best


def test_c07_training_allocation_optimality():
    start = time.perf_counter()
    worst_gap, worst_kkt, cases = 0.0, 0.0, 0
    for k in (1, 2):
        cfg = SystemConfig(num_targets=k)
        for trial in range(5):
            prob = al.AllocationProblem(sample_scenario(cfg, 707, trial), cfg)
            for n in (1, 3):
                try:
                    thr = al.tracking_thresholds(prob, n)
                    sol = al.solve_p2a(thr, cfg.total_power, cfg.total_subcarriers)
                except al.InfeasibleError:
                    continue
                grid = _grid_p0b0(thr, cfg.total_power, cfg.total_subcarriers)
                worst_gap = max(worst_gap, abs(sol.p0b0 - grid) / grid)
                worst_kkt = max(worst_kkt, al.p2a_kkt_residual(sol, thr))
                cases += 1
    cfg4 = SystemConfig(num_targets=4)
    for trial in range(10):
        prob = al.AllocationProblem(sample_scenario(cfg4, 717, trial), cfg4)
        try:
            thr = al.tracking_thresholds(prob, 2)
            sol = al.solve_p2a(thr, cfg4.total_power, cfg4.total_subcarriers)
        except al.InfeasibleError:
            continue
        worst_kkt = max(worst_kkt, al.p2a_kkt_residual(sol, thr))
        cases += 1
    elapsed = time.perf_counter() - start
    ok = worst_gap <= 0.01 and worst_kkt < 1e-6 and elapsed < 60 and cases >= 20
    report(7, ok, f"{cases} instances, grid gap {worst_gap:.2e}, KKT {worst_kkt:.2e}, {elapsed:.1f}s")


def test_c08_horizon_bound_validity():
    cfg = SystemConfig()
    valid, tight, total = 0, 0, 0
    for trial in range(50):
        prob = al.AllocationProblem(sample_scenario(cfg, 808, trial), cfg)
        for cs in comm.SCHEMES:
            bound = al.n_max(prob, cs)
            found = al.feasible_interval_scan(prob, cs, prob.max_blocks)
            total += 1
            valid += bound >= found
            tight += bound <= found + 3
    report(8, valid == total, f"N_max >= scanned maximum in {valid}/{total}; "
                              f"within +3 in {tight}/{total} (monitored)")


def test_c09_interior_optimal_interval():
    cfg = SystemConfig()
    parts, ok = [], True
    for cs in comm.SCHEMES:
        interior = 0
        for trial in range(50):
            prob = al.AllocationProblem(sample_scenario(cfg, 909, trial), cfg)
            sol = al.solve(prob, cs, "proposed")
            if sol.feasible:
                ns = sorted(sol.curve)
                interior += ns[0] < sol.num_blocks < ns[-1]
        parts.append(f"{cs} {interior}/50")
        ok &= interior >= 40
    report(9, ok, "interior maximizer: " + ", ".join(parts))


def test_c10_scheme_ordering():
    start = time.perf_counter()
    spec = ex.default_spec("fig7", trials=200)
    table = ex.run_experiment(spec)
    failures = []
    for row in table.select(metric="proposed_minus"):
        kind = row.scheme.rsplit("_", 1)[0]
        if row.trials == 0:
            continue
        # upper_bound must not fall below proposed; the others must not exceed it
        bad = row.mean > row.stderr if kind == "upper_bound" else row.mean < -row.stderr
        if bad:
            failures.append(f"{row.scheme}@{row.sweep_value:g}dBm ({row.mean:+.3g}±{row.stderr:.2g})")
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 1200
    report(10, ok, f"paired comparisons over {len(spec.grid)} powers, {elapsed:.0f}s"
                   + ("" if ok else "; violations: " + ", ".join(failures)))


def test_c11_user_count_directions():
    spec = ex.default_spec("fig9", trials=50, kinds=("proposed",))
    table = ex.run_experiment(spec)
    curves = {cs: [table.value(scheme=f"proposed_{cs}", metric="rate", sweep_value=float(q))
                   for q in spec.grid] for cs in comm.SCHEMES}
    mrt_ok = all(np.diff(curves["mrt"]) >= 0)
    zf_ok = all(np.diff(curves["zf"]) <= 0)
    fmt = {cs: "[" + ", ".join(f"{v:.3f}" for v in c) + "]" for cs, c in curves.items()}
    report(11, mrt_ok and zf_ok,
           f"Q={list(spec.grid)} MRT {fmt['mrt']} ({'up' if mrt_ok else 'not monotone'}), "
           f"ZF {fmt['zf']} ({'down' if zf_ok else 'not monotone'})")


def test_c12_determinism(tmp_path):
    results = []
    for figure, changes in (("fig4", dict(trials=5, grid=(0.0, 30.0))),
                            ("fig5", dict(trials=3, draws=1000, grid=(0.0, 20.0))),
                            ("fig6", dict(trials=4, grid=(1, 2, 3)))):
        spec = ex.default_spec(figure, **changes)
        a, b = tmp_path / f"{figure}a.csv", tmp_path / f"{figure}b.csv"
        ex.run_to_file(spec, a, workers=1)
        ex.run_to_file(spec, b, workers=2)
        results.append(a.read_bytes() == b.read_bytes())
    report(12, all(results), f"byte-identical reruns {sum(results)}/{len(results)} "
                             "(1 vs 2 workers)")
