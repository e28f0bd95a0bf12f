import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dfrc_aging.bounds import crlb_block1
from dfrc_aging.config import SystemConfig, dbm_to_watt
from dfrc_aging.model import TargetState, derive_radar_link
from dfrc_aging.radar import (angle_spectrum, element_noise_variance, estimate_angle,
                              estimate_delay_doppler, estimate_mobility, qpsk,
                              synthesize_measurement, to_mobility)


def test_qpsk_unit_modulus():
    s = qpsk(np.random.default_rng(0), (50, 4))
    assert np.allclose(np.abs(s), 1.0)
    assert len(np.unique(np.round(np.angle(s), 6))) == 4


def test_equalization_removes_symbols(small_cfg, target):
    meas = synthesize_measurement(target, 1e-3, 8, small_cfg, None)
    eq = meas.equalized
    # noiseless echo is separable: amplitude is the same on every cell and antenna
    assert np.allclose(np.abs(eq), np.abs(eq[0, 0, 0]))


def test_noise_level(small_cfg, target):
    # same seed draws the same symbols first, so the difference is the noise alone
    noisy = synthesize_measurement(target, 1e-3, 8, small_cfg, np.random.default_rng(1))
    clean = synthesize_measurement(target, 1e-3, 8, small_cfg, np.random.default_rng(1), noiseless=True)
    assert np.array_equal(noisy.symbols, clean.symbols)
    var = np.mean(np.abs(noisy.grid - clean.grid) ** 2)
    assert var == pytest.approx(element_noise_variance(1e-3, small_cfg), rel=0.1)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.9), st.floats(60, 400), st.floats(5, 40), st.floats(0, 2 * math.pi))
def test_noiseless_recovery(angle, distance, velocity, heading):
    cfg = SystemConfig()
    s = TargetState(angle, distance, velocity, heading)
    if abs(math.cos(s.relative_angle)) < 0.2:
        return
    est = estimate_mobility(synthesize_measurement(s, 1e-3, 16, cfg, None), heading, cfg)
    assert est.angle == pytest.approx(angle, abs=1e-6)
    assert est.distance == pytest.approx(distance, abs=1e-3)
    assert est.velocity == pytest.approx(velocity, abs=1e-3)


def test_angle_spectrum_peaks_at_truth(small_cfg, target):
    meas = synthesize_measurement(target, 1e-3, 8, small_cfg, None)
    grid = np.linspace(-1.2, 1.2, 481)
    spec = angle_spectrum(meas, grid)
    assert abs(grid[np.argmax(spec)] - target.angle) <= grid[1] - grid[0]


def test_delay_doppler_without_refinement_is_close(cfg, target):
    meas = synthesize_measurement(target, 1e-3, 16, cfg, None)
    link = derive_radar_link(target, cfg)
    delay, doppler = estimate_delay_doppler(meas, target.angle, refine=False)
    assert delay == pytest.approx(link.delay, rel=1e-2)
    assert doppler == pytest.approx(link.doppler, rel=1e-2)


def test_to_mobility_inverts_link(cfg, target):
    link = derive_radar_link(target, cfg)
    est = to_mobility(link.delay, link.doppler, target.angle, target.heading, cfg)
    assert est.mobility == pytest.approx(target.mobility)


def test_high_snr_errors_near_bound():
    cfg = SystemConfig(training_symbols=60)
    target = TargetState(0.3, 150.0, 30.0, heading=0.2 + math.pi)
    p, band = dbm_to_watt(25.0) / 4, 16
    bound = crlb_block1(target, p, band, cfg).diag
    errs = []
    for trial in range(40):
        rng = np.random.default_rng(trial)
        meas = synthesize_measurement(target, p, band, cfg, rng)
        errs.append(estimate_mobility(meas, target.heading, cfg).mobility - target.mobility)
    ratio = np.mean(np.square(errs), axis=0) / bound
    assert np.all(ratio > 0.4) and np.all(ratio < 2.5)


def test_interference_from_other_targets_is_small(cfg, target):
    other = TargetState(0.9, 220.0, 20.0, heading=0.5)
    alone = estimate_angle(synthesize_measurement(target, 1e-3, 16, cfg, None))
    mixed = estimate_angle(synthesize_measurement(target, 1e-3, 16, cfg, None, interferers=(other,)))
    assert abs(mixed - alone) < 1e-2
