import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dfrc_aging.bounds import (aged_covariance_exact, aged_covariance_recursive, aged_crlb_approx,
                               aging_coefficients, crlb_block1, crlb_constants, fisher_full,
                               fisher_oracle, jacobian, predict_trajectory)
from dfrc_aging.config import SystemConfig, dbm_to_watt
from dfrc_aging.errors import GeometryError
from dfrc_aging.model import TargetState, evolve_state_linearized


def states():
    return st.builds(TargetState, angle=st.floats(-1.2, 1.2), distance=st.floats(50, 600),
                     velocity=st.floats(1, 60), heading=st.floats(0, 2 * math.pi)).filter(
        lambda s: abs(math.cos(s.relative_angle)) > 0.05)


def test_block1_bound_regression(cfg, target):
    c = crlb_block1(target, dbm_to_watt(-10), 16, cfg)
    assert c.diag == pytest.approx([6.381968781659115e-07, 0.5383755586263373, 0.016942111000819337],
                                   rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(states(), st.floats(-20, 20), st.integers(2, 40))
def test_closed_form_matches_per_axis_fisher(state, power_dbm, band):
    cfg = SystemConfig()
    p = dbm_to_watt(power_dbm)
    closed = crlb_block1(state, p, band, cfg).diag
    oracle = fisher_oracle(state, p, band, cfg.training_symbols, cfg)
    assert closed == pytest.approx(oracle, rel=1e-6)


def test_closed_form_matches_joint_fisher(small_cfg, target):
    closed = crlb_block1(target, 1e-3, 8, small_cfg).diag
    joint = fisher_full(target, 1e-3, 8, small_cfg.training_symbols, small_cfg)
    assert closed == pytest.approx(joint, rel=1e-8)


def test_bound_scaling_laws(cfg, target):
    base = crlb_block1(target, 1e-3, 10, cfg)
    doubled = crlb_block1(target, 2e-3, 10, cfg)
    assert doubled.diag == pytest.approx(base.diag / 2, rel=1e-12)
    wide = crlb_block1(target, 1e-3, 20, cfg)
    assert wide.angle == pytest.approx(base.angle / 2)
    assert wide.velocity == pytest.approx(base.velocity / 2)
    assert wide.distance == pytest.approx(base.distance * 10 * 99 / (20 * 399))


def test_bound_rejects_degenerate_inputs(cfg, target):
    with pytest.raises(ValueError):
        crlb_block1(target, 1e-3, 1, cfg)
    with pytest.raises(GeometryError):
        crlb_constants(target, SystemConfig(num_rx_antennas=1))
    broadside = TargetState(angle=math.pi / 2, distance=100.0, velocity=10.0)
    with pytest.raises(GeometryError):
        crlb_constants(broadside, cfg)


def test_tangential_motion_has_no_velocity_bound(cfg):
    s = TargetState(angle=0.3, distance=100.0, velocity=10.0, heading=0.3 + math.pi / 2)
    assert math.isinf(crlb_constants(s, cfg)[2])


@settings(max_examples=30, deadline=None)
@given(states(), st.floats(1e-4, 5e-2))
def test_jacobian_determinant(state, t):
    g = jacobian(state, t)
    r = state.velocity * t / state.distance
    c, s = math.cos(state.relative_angle), math.sin(state.relative_angle)
    assert np.linalg.det(g) == pytest.approx(1 + r * c + (r * s) ** 2, rel=1e-9)


def test_jacobian_matches_finite_difference(target):
    t, h = 1e-2, 1e-6
    heading = target.heading

    def step(x):
        return TargetState(*x, heading=heading)

    g = jacobian(target, t)
    num = np.empty((3, 3))
    for j in range(3):
        dx = np.zeros(3)
        dx[j] = h
        up = evolve_state_linearized(step(target.mobility + dx), t).mobility
        dn = evolve_state_linearized(step(target.mobility - dx), t).mobility
        num[:, j] = (up - dn) / (2 * h)
    assert g == pytest.approx(num, rel=1e-5, abs=1e-9)


def _setup(cfg, target, n):
    c1 = crlb_block1(target, 1e-3, 12, cfg)
    traj = predict_trajectory(target, cfg.block_duration, n)
    return c1, traj


@pytest.mark.parametrize("n", [1, 2, 5, 10])
def test_exact_and_recursive_covariances_agree(cfg, target, n):
    c1, traj = _setup(cfg, target, n)
    e1 = aged_covariance_exact(c1, traj, target.evolution_cov, n, cfg.block_duration)
    e2 = aged_covariance_recursive(c1, traj, target.evolution_cov, n, cfg.block_duration)
    assert e1.matrix == pytest.approx(e2.matrix, rel=1e-12, abs=1e-300)


def test_aged_bound_at_first_block_is_block1_bound(cfg, target):
    c1, traj = _setup(cfg, target, 1)
    aged = aged_crlb_approx(c1, traj, target.evolution_cov, 1, cfg.block_duration)
    assert aged.diag == pytest.approx(c1.diag)
    assert (aged.a, aged.b) == (1.0, 0.0)


def test_aging_coefficients_small_examples(cfg, target):
    traj = predict_trajectory(target, cfg.block_duration, 4)
    c = [s.velocity * cfg.block_duration * math.cos(s.relative_angle) / s.distance for s in traj]
    assert aging_coefficients(traj, cfg.block_duration, 2) == pytest.approx(((1 + c[0]) ** 2, 1.0))
    a3, b3 = aging_coefficients(traj, cfg.block_duration, 3)
    assert a3 == pytest.approx((1 + c[0] + c[1]) ** 2)
    assert b3 == pytest.approx(1 + (1 + c[1]) ** 2)


@pytest.mark.parametrize("n", [2, 5, 10])
def test_approximation_tracks_exact_diagonal(cfg, target, n):
    c1, traj = _setup(cfg, target, n)
    exact = aged_covariance_exact(c1, traj, target.evolution_cov, n, cfg.block_duration).diag
    approx = aged_crlb_approx(c1, traj, target.evolution_cov, n, cfg.block_duration).diag
    assert approx == pytest.approx(exact, rel=0.05)


def test_aged_bound_grows_with_block_index(cfg, target):
    c1, traj = _setup(cfg, target, 10)
    seq = [aged_crlb_approx(c1, traj, target.evolution_cov, n, cfg.block_duration).diag
           for n in range(1, 11)]
    assert np.all(np.diff(np.array(seq), axis=0)[:, 1:] > 0)
