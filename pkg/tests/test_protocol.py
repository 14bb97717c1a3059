"""Tests for the two-state protocol: measurement, sifting and rate formulas."""

import math

import numpy as np
import pytest

from ponqkd.photonics import SourceModel
from ponqkd.protocol import (LinkCalibration, SiftedKeyStats, alice_sequence,
                             bob_measure, eve_info, measure_batch, net_rate,
                             net_rate_factor, qber_extrapolate, resolve_slots,
                             sift, sifted_rate_pdl, zero_rate_qber)
from ponqkd.runner import derive_rng

I_AE_45 = 0.2928932188134524
FACTOR_WORKING_POINT = 0.43104926628887386   # F(q=0.0359, I_AE at 45 deg)
ZERO_RATE_45 = 0.11899684043677353
ZERO_RATE_56 = 0.09348673885769487


def boolarr(*flags):
    return np.array(flags, dtype=bool)


def test_alice_sequence_maps_bits_to_angles():
    src = SourceModel(clock_hz=1e9, mu=0.1)
    bits, angles = alice_sequence(50_000, src, derive_rng(2, "alice"))
    assert set(np.unique(bits)) <= {0, 1}
    np.testing.assert_allclose(angles, np.where(bits == 1, -22.5, 22.5))
    # fair coin within 5 sigma
    assert abs(bits.mean() - 0.5) < 5 * math.sqrt(0.25 / bits.size)
    with pytest.raises(ValueError):
        alice_sequence(0, src, derive_rng(2))


def test_measure_batch_never_misreads_a_protocol_state():
    """A photon in state b only ever produces conclusive bit b.

    The test for the other bit projects onto the direction orthogonal to
    state b, so it can never click.  This holds for any seed.
    """
    rng = derive_rng(6, "measure")
    for bit, angle in ((1, -22.5), (0, 22.5)):
        angles = np.full(20_000, angle)
        conclusive, bits = measure_batch(angles, 22.5, -22.5, rng)
        assert conclusive.any()
        assert np.all(bits[conclusive] == bit)
        # conclusive probability is sin^2(45)/2 = 1/4
        p = conclusive.mean()
        assert abs(p - 0.25) < 5 * math.sqrt(0.25 * 0.75 / angles.size)


def test_measure_batch_orthogonal_photon_always_clicks_its_test():
    """A photon orthogonal to state 0 clicks whenever tested for bit 1."""
    rng = derive_rng(6, "ortho")
    angles = np.full(5_000, 22.5 + 90.0)
    conclusive, bits = measure_batch(angles, 22.5, -22.5, rng)
    tested_one = bits == 1
    assert np.all(conclusive[tested_one])


def test_bob_measure_scalar_wrapper():
    rng = derive_rng(6, "bob")
    outcomes = {bob_measure(22.5, rng) for _ in range(300)}
    assert outcomes <= {None, 0}
    assert 0 in outcomes


def test_resolve_slots_groups_and_drops_conflicts():
    slots = np.array([3, 1, 1, 2, 2])
    conclusive = boolarr(True, True, True, True, True)
    bits = np.array([1, 0, 0, 1, 0], dtype=np.uint8)
    dark = boolarr(False, True, False, False, False)
    wrong = boolarr(False, False, False, False, True)
    leak = boolarr(True, False, False, False, False)
    s, b, d, w, l, conflicts = resolve_slots(slots, conclusive, bits, dark, wrong, leak)
    np.testing.assert_array_equal(s, [1, 3])   # slot 2 disagreed and is gone
    np.testing.assert_array_equal(b, [0, 1])
    np.testing.assert_array_equal(d, [True, False])   # OR over slot events
    np.testing.assert_array_equal(l, [False, True])
    assert conflicts == 1


def test_resolve_slots_ignores_inconclusive_events():
    slots = np.array([5, 5])
    conclusive = boolarr(False, True)
    bits = np.array([0, 1], dtype=np.uint8)
    f = boolarr(False, False)
    s, b, *_ , conflicts = resolve_slots(slots, conclusive, bits, f, f, f)
    np.testing.assert_array_equal(s, [5])
    np.testing.assert_array_equal(b, [1])
    assert conflicts == 0


def test_resolve_slots_empty():
    empty = np.array([], dtype=np.int64)
    ebool = np.array([], dtype=bool)
    s, b, d, w, l, conflicts = resolve_slots(empty, ebool, empty, ebool, ebool, ebool)
    assert s.size == 0 and conflicts == 0


def test_sift_counts_errors_exactly():
    alice = np.array([1, 0, 1, 0, 1], dtype=np.uint8)
    slots = np.array([0, 1, 3])
    bits = np.array([1, 1, 1], dtype=np.uint8)   # errors at slots 1 and 3
    dark = boolarr(False, True, False)
    wrong = boolarr(False, False, True)
    leak = boolarr(False, False, False)
    stats = sift(alice, (slots, bits, dark, wrong, leak, 0), 1e9, 5)
    assert stats.sifted_count == 3
    assert stats.error_count == 2
    assert stats.qber == pytest.approx(2 / 3)
    assert stats.qber_dark == pytest.approx(1 / 3)
    assert stats.qber_jitter == pytest.approx(1 / 3)
    assert stats.qber_leak == 0.0
    assert stats.sifted_rate_bps == pytest.approx(3 * 1e9 / 5)


def test_sift_empty_key_is_valid():
    alice = np.zeros(10, dtype=np.uint8)
    empty = np.array([], dtype=np.int64)
    ebool = np.array([], dtype=bool)
    stats = sift(alice, (empty, empty.astype(np.uint8), ebool, ebool, ebool, 2), 1e9, 10)
    assert stats.empty
    assert stats.sifted_count == 0
    assert math.isnan(stats.qber)
    assert stats.conflict_slots == 2


def test_eve_info_values_and_domain():
    assert eve_info(45.0) == pytest.approx(I_AE_45, abs=1e-12)
    assert eve_info(0.0) == 0.0
    assert eve_info(90.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        eve_info(-1.0)
    with pytest.raises(ValueError):
        eve_info(90.1)


def test_net_rate_factor_reference_points():
    assert net_rate_factor(0.0359, I_AE_45) == pytest.approx(FACTOR_WORKING_POINT, abs=1e-12)
    assert net_rate_factor(0.0, 0.0) == pytest.approx(1.0)
    # a fully informed eavesdropper wipes out an error-free key
    assert net_rate_factor(0.0, 1.0) == pytest.approx(0.0)


def test_net_rate_factor_decreases_with_qber():
    qs = np.linspace(1e-6, 0.3, 200)
    fs = [net_rate_factor(q, I_AE_45) for q in qs]
    assert all(a > b for a, b in zip(fs, fs[1:]))


def test_net_rate_factor_domain():
    with pytest.raises(ValueError):
        net_rate_factor(-0.01, 0.3)
    with pytest.raises(ValueError):
        net_rate_factor(0.1, -0.1)


def test_zero_rate_roots():
    assert zero_rate_qber(I_AE_45) == pytest.approx(ZERO_RATE_45, abs=1e-6)
    i56 = eve_info(56.0)
    assert zero_rate_qber(i56) == pytest.approx(ZERO_RATE_56, abs=1e-6)
    # the factor really changes sign there
    for root, i_ae in ((ZERO_RATE_45, I_AE_45), (ZERO_RATE_56, i56)):
        assert net_rate_factor(root - 1e-4, i_ae) > 0
        assert net_rate_factor(root + 1e-4, i_ae) < 0


def test_net_rate_clamps_below_zero_rate_qber():
    stats = SiftedKeyStats(1000, 1e4, 150, 0.15, 0.0, 0.15, 0.0)
    report = net_rate(stats, I_AE_45)
    assert report.distillation_factor < 0
    assert report.net_rate_bps == 0.0
    good = SiftedKeyStats(1000, 1e4, 36, 0.036, 0.0, 0.036, 0.0)
    rep = net_rate(good, I_AE_45)
    assert rep.net_rate_bps == pytest.approx(1e4 * net_rate_factor(0.036, I_AE_45))


def test_sifted_rate_pdl_reference():
    assert sifted_rate_pdl(45.0, 1.0, 1.0) == pytest.approx(0.5)
    assert sifted_rate_pdl(90.0, 0.5, 0.5) == pytest.approx(0.5)
    assert sifted_rate_pdl(0.0, 1.0, 1.0) == 0.0


def test_qber_extrapolation_law():
    cal = LinkCalibration(kappa=0.01, dark_noise_cps=400.0, reference_rate_bps=1e4)
    assert qber_extrapolate(cal, 1e4) == pytest.approx(0.01 + 400.0 / 2e4)
    # halving the rate doubles the dark contribution
    assert qber_extrapolate(cal, 5e3) == pytest.approx(0.01 + 400.0 / 1e4)
    with pytest.raises(ValueError):
        qber_extrapolate(cal, 0.0)


def test_calibration_validation():
    with pytest.raises(ValueError):
        LinkCalibration(kappa=-0.1, dark_noise_cps=0.0, reference_rate_bps=1.0)
    with pytest.raises(ValueError):
        LinkCalibration(kappa=0.0, dark_noise_cps=-1.0, reference_rate_bps=1.0)
    with pytest.raises(ValueError):
        LinkCalibration(kappa=0.0, dark_noise_cps=0.0, reference_rate_bps=0.0)
