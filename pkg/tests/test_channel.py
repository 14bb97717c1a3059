"""Tests for fiber spans, splitters, topologies and photon propagation."""

import math
from dataclasses import replace

import numpy as np
import pytest

from ponqkd.channel import (FIBER_ATTEN_DB_PER_KM, FiberSpan, SplitterModel,
                            SplitterPort, TopologySpec, build_topology,
                            default_port_losses, effective_mu, path_loss_db,
                            propagate, route_splitter)
from ponqkd.polarization import PdlElement, pdl_rotate_angle
from ponqkd.runner import derive_rng

# chi-square critical value, 7 degrees of freedom, 99.9th percentile
CHI2_7_999 = 24.3219


def ideal_splitter(n_ports: int) -> SplitterModel:
    return SplitterModel(n_ports, (10.0 * math.log10(n_ports),) * n_ports)


def test_fiber_span_loss_and_delay():
    span = FiberSpan(10.0)
    assert span.loss_db == pytest.approx(22.0)
    # group delay: length * group index / c, with c in km/s
    assert span.delay_s == pytest.approx(10.0 * 1.468 / 299792.458, rel=1e-9)
    assert FiberSpan(3.0, atten_db_per_km=0.2).loss_db == pytest.approx(0.6)


def test_fiber_span_rejects_negative_length():
    with pytest.raises(ValueError):
        FiberSpan(-1.0)


def test_default_port_losses_presets():
    """The two documented presets reproduce their mean and port spread."""
    for n, mean_db, spread_db in ((8, 13.28, 1.1), (32, 17.99, 9.52)):
        losses = default_port_losses(n)
        assert np.mean(losses) == pytest.approx(mean_db, abs=1e-9)
        assert max(losses) - min(losses) == pytest.approx(spread_db, abs=1e-9)
        assert all(a <= b for a, b in zip(losses, losses[1:]))


def test_default_port_losses_other_sizes_are_flat():
    losses = default_port_losses(4)
    assert len(losses) == 4
    assert all(l == pytest.approx(10.0 * math.log10(4) + 0.5) for l in losses)


def test_default_port_losses_custom_ramp():
    losses = default_port_losses(16, mean_db=15.0, spread_db=2.0)
    assert np.mean(losses) == pytest.approx(15.0)
    assert max(losses) - min(losses) == pytest.approx(2.0)


def test_splitter_rejects_sub_physical_loss():
    """Port losses cannot beat the 1/N split by more than the 0.5 dB grace."""
    n = 8
    too_low = (10.0 * math.log10(n) - 1.0,) * n
    with pytest.raises(ValueError):
        SplitterModel(n, too_low)


def test_splitter_rejects_transmission_sum_above_one():
    # each port at the floor: sum of transmissions = 8 * 10^0.05 / 8 > 1
    n = 8
    floor = (10.0 * math.log10(n) - 0.5,) * n
    with pytest.raises(ValueError):
        SplitterModel(n, floor)


def test_splitter_rejects_arity_mismatch():
    with pytest.raises(ValueError):
        SplitterModel(8, (13.0,) * 7)
    with pytest.raises(ValueError):
        SplitterModel(8, (13.0,) * 8, (PdlElement(1.0),) * 3)


def test_splitter_transmissions():
    s = ideal_splitter(8)
    assert s.transmission(0) == pytest.approx(0.125, rel=1e-12)
    assert s.transmissions.sum() == pytest.approx(1.0, rel=1e-12)


def test_topology_spec_validation():
    with pytest.raises(ValueError):
        TopologySpec(kind="nonsense", mu_convention="per_arm", mu_value=0.1)
    with pytest.raises(ValueError):  # splitter kinds need a splitter
        TopologySpec(kind="pon_p2p", mu_convention="per_arm", mu_value=0.1)
    with pytest.raises(ValueError):  # single receiver takes exactly one span
        TopologySpec(kind="single_receiver", mu_convention="per_arm",
                     mu_value=0.1, drop_kms=(1.0, 2.0))
    with pytest.raises(ValueError):  # feeder only exists in p2mp_pon
        TopologySpec(kind="pon_p2p", mu_convention="per_arm", mu_value=0.1,
                     drop_kms=(0.0,) * 8, feeder_km=5.0,
                     splitter=ideal_splitter(8))
    with pytest.raises(ValueError):  # drop count must match port count
        TopologySpec(kind="pon_p2p", mu_convention="per_arm", mu_value=0.1,
                     drop_kms=(0.0,) * 5, splitter=ideal_splitter(8))


def test_build_topology_single_receiver():
    spec = TopologySpec(kind="single_receiver", mu_convention="per_arm",
                        mu_value=0.1, drop_kms=(7.0,))
    topo = build_topology(spec)
    assert topo.n_receivers == 1
    path = topo.paths[0]
    assert path.elements == path.sim_elements
    assert path.length_km == pytest.approx(7.0)
    assert path_loss_db(topo, 0) == pytest.approx(7.0 * FIBER_ATTEN_DB_PER_KM)


def test_build_topology_strips_port_scalar_loss_from_sim_path():
    """Per-arm photon numbers are referenced after the splitter's scalar
    loss, so the simulated path keeps the port's PDL but not its insertion
    loss (which would otherwise be double-counted)."""
    spec = TopologySpec(kind="pon_p2p", mu_convention="per_arm", mu_value=0.1,
                        drop_kms=(1.0,) * 8, splitter=ideal_splitter(8))
    topo = build_topology(spec)
    assert topo.n_receivers == 8
    for port, path in enumerate(topo.paths):
        full_port = path.elements[0]
        sim_port = path.sim_elements[0]
        assert isinstance(full_port, SplitterPort)
        assert full_port.insertion_loss_db > 0
        assert sim_port.insertion_loss_db == 0.0
        assert sim_port.pdl == full_port.pdl
        assert isinstance(path.sim_elements[1], FiberSpan)


def test_build_topology_feeder_excluded_from_sim_path():
    spec = TopologySpec(kind="p2mp_pon", mu_convention="aggregate",
                        mu_value=0.5, drop_kms=(1.0,) * 8, feeder_km=10.0,
                        splitter=ideal_splitter(8))
    topo = build_topology(spec)
    path = topo.paths[3]
    assert isinstance(path.elements[0], FiberSpan)
    assert path.elements[0].length_km == pytest.approx(10.0)
    assert len(path.sim_elements) == 2  # port + drop, no feeder
    assert path.length_km == pytest.approx(11.0)


def test_path_loss_includes_port_and_excess():
    pdl = (PdlElement(2.0, excess_loss_db=0.3),) * 8
    splitter = SplitterModel(8, (13.0,) * 8, pdl)
    spec = TopologySpec(kind="pon_p2p", mu_convention="per_arm", mu_value=0.1,
                        drop_kms=(2.0,) * 8, splitter=splitter)
    topo = build_topology(spec)
    assert path_loss_db(topo, 0) == pytest.approx(13.0 + 0.3 + 4.4)


def test_effective_mu_conventions():
    splitter = ideal_splitter(8)
    base = dict(drop_kms=(0.0,) * 8, splitter=splitter)
    per_arm = build_topology(TopologySpec(kind="pon_p2p", mu_convention="per_arm",
                                          mu_value=0.2, **base))
    aggregate = build_topology(TopologySpec(kind="pon_p2p", mu_convention="aggregate",
                                            mu_value=0.2, **base))
    for port in range(8):
        assert effective_mu(per_arm, port) == pytest.approx(0.2)
        assert effective_mu(aggregate, port) == pytest.approx(
            0.2 * splitter.transmission(port))
        assert effective_mu(aggregate, port) < effective_mu(per_arm, port)


def test_route_splitter_is_uniform_on_ideal_ports():
    """Routing frequencies on an ideal 1x8 pass a chi-square uniformity test."""
    rng = derive_rng(90210, "route")
    ports = route_splitter(80_000, ideal_splitter(8), rng)
    assert ports.min() >= 0  # ideal splitter loses (almost) nothing
    counts = np.bincount(ports, minlength=8)
    expected = 80_000 / 8.0
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < CHI2_7_999


def test_route_splitter_loses_excess():
    """A lossy splitter routes the missing probability to port -1."""
    n = 8
    lossy = SplitterModel(n, (13.0,) * n)
    rng = derive_rng(90210, "route-lossy")
    ports = route_splitter(200_000, lossy, rng)
    lost = float(np.mean(ports == -1))
    expect = 1.0 - n * 10.0 ** -1.3
    se = math.sqrt(expect * (1 - expect) / 200_000)
    assert abs(lost - expect) < 5 * se


def test_propagate_fiber_adds_delay_and_thins():
    span = FiberSpan(10.0)
    n = 100_000
    times = np.zeros(n)
    angles = np.full(n, 22.5)
    rng = derive_rng(4, "prop")
    out_t, out_a, idx = propagate(times, angles, (span,), rng)
    assert np.allclose(out_t, span.delay_s)
    assert np.all(out_a == 22.5)
    p = 10.0 ** (-span.loss_db / 10.0)
    se = math.sqrt(n * p * (1 - p))
    assert abs(idx.size - n * p) < 5 * se


def test_propagate_pdl_rotates_survivors():
    port = SplitterPort(0, 0.0, PdlElement(2.23, axis_deg=10.0))
    n = 20_000
    rng = derive_rng(4, "prop-pdl")
    out_t, out_a, idx = propagate(np.zeros(n), np.full(n, 32.5), (port,), rng)
    expected = (float(pdl_rotate_angle(22.5, 2.23)) + 10.0) % 360.0
    assert np.allclose(out_a, expected)
    # survivors thinned by the 22.5-deg intensity factor
    se = math.sqrt(n * 0.657 * 0.343)
    assert abs(idx.size - n * 0.657223) < 5 * se


def test_propagate_rejects_unknown_elements():
    with pytest.raises(TypeError):
        propagate(np.zeros(1), np.zeros(1), ("not-an-element",), derive_rng(1))


def test_propagate_empty_batch():
    out_t, out_a, idx = propagate(np.zeros(0), np.zeros(0),
                                  (FiberSpan(1.0),), derive_rng(1))
    assert out_t.size == 0 and out_a.size == 0 and idx.size == 0
