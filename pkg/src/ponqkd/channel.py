"""Optical distribution network: fiber spans, passive splitters, topologies.

Three layouts are supported:

* ``single_receiver`` — transmitter, one fiber span, one receiver.
* ``pon_p2p`` — the splitter sits at the transmitter side (inside the central
  node) and each output port feeds its own transmission fiber to a receiver.
* ``p2mp_pon`` — a shared feeder fiber runs from the transmitter to a field
  splitter, and each port continues over a drop fiber to a receiver.

Mean photon number can be referenced per arm (set at each splitter output) or
as an aggregate at the splitter input; ``effective_mu`` resolves either
convention to the per-arm mean.  Splitter ports are characterised by a
measured insertion loss (used directly as the input-to-port transmission) and
an optional polarization-dependent loss element.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .polarization import PdlElement, pdl_intensity_factor, pdl_rotate_angle

__all__ = [
    "FIBER_ATTEN_DB_PER_KM",
    "GROUP_INDEX",
    "FiberSpan",
    "SplitterModel",
    "SplitterPort",
    "TopologySpec",
    "ChannelPath",
    "Topology",
    "default_port_losses",
    "build_topology",
    "path_loss_db",
    "effective_mu",
    "route_splitter",
    "propagate",
]

# Multimode fiber attenuation at 850 nm, dB/km.
FIBER_ATTEN_DB_PER_KM = 2.2
# Group index used to turn span length into propagation delay.
GROUP_INDEX = 1.468
_C_KM_PER_S = 299792.458

TOPOLOGY_KINDS = ("single_receiver", "pon_p2p", "p2mp_pon")
MU_CONVENTIONS = ("per_arm", "aggregate")


@dataclass(frozen=True)
class FiberSpan:
    """A passive fiber span with linear attenuation."""

    length_km: float
    atten_db_per_km: float = FIBER_ATTEN_DB_PER_KM

    def __post_init__(self):
        if self.length_km < 0:
            raise ValueError(f"fiber length must be >= 0 km, got {self.length_km}")
        if self.atten_db_per_km < 0:
            raise ValueError(f"attenuation must be >= 0 dB/km, got {self.atten_db_per_km}")

    @property
    def loss_db(self) -> float:
        return self.length_km * self.atten_db_per_km

    @property
    def delay_s(self) -> float:
        return self.length_km * GROUP_INDEX / _C_KM_PER_S


def default_port_losses(n_ports: int, mean_db: float | None = None,
                        spread_db: float | None = None) -> list[float]:
    """Synthetic per-port insertion-loss vector for an n-port splitter.

    Port losses follow a quadratic ramp from best to worst port:
    ``loss[i] = lo + spread * (i / (n-1))^2`` with ``lo`` chosen so the vector
    mean equals ``mean_db``.  Defaults reproduce bench-measured averages and
    port-to-port spreads for the 1x8 (13.28 dB mean, 1.1 dB spread) and 1x32
    (17.99 dB mean, 9.52 dB spread) devices; other sizes default to the ideal
    split ratio plus 0.5 dB excess and zero spread.
    """
    if n_ports < 1:
        raise ValueError(f"n_ports must be >= 1, got {n_ports}")
    if mean_db is None or spread_db is None:
        presets = {8: (13.28, 1.1), 32: (17.99, 9.52)}
        preset_mean, preset_spread = presets.get(
            n_ports, (10.0 * math.log10(n_ports) + 0.5, 0.0))
        mean_db = preset_mean if mean_db is None else mean_db
        spread_db = preset_spread if spread_db is None else spread_db
    if n_ports == 1:
        return [mean_db]
    # Mean of (i/(n-1))^2 over i = 0..n-1 is (2n-1)/(6(n-1)).
    ramp_mean = (2 * n_ports - 1) / (6.0 * (n_ports - 1))
    lo = mean_db - spread_db * ramp_mean
    return [lo + spread_db * (i / (n_ports - 1)) ** 2 for i in range(n_ports)]


@dataclass(frozen=True)
class SplitterModel:
    """A 1xN passive splitter described by per-port measured losses.

    ``insertion_loss_db[i]`` is used directly as the input-to-port-i
    transmission in dB.  ``pdl`` optionally attaches a PDL element per port
    (scalar excess loss belongs in the insertion loss, not in the element).
    """

    n_ports: int
    insertion_loss_db: tuple = ()
    pdl: tuple = ()

    def __post_init__(self):
        if self.n_ports < 1:
            raise ValueError(f"splitter needs >= 1 port, got {self.n_ports}")
        losses = tuple(float(x) for x in (self.insertion_loss_db or
                                          default_port_losses(self.n_ports)))
        if len(losses) != self.n_ports:
            raise ValueError(
                f"splitter.insertion_loss_db: expected {self.n_ports} entries, got {len(losses)}")
        floor = 10.0 * math.log10(self.n_ports) - 0.5
        for i, loss in enumerate(losses):
            if loss < floor:
                raise ValueError(
                    f"splitter.insertion_loss_db[{i}] = {loss} dB implies an unphysical "
                    f"split ratio (must be >= {floor:.2f} dB for {self.n_ports} ports)")
        total = sum(10.0 ** (-loss / 10.0) for loss in losses)
        if total > 1.0 + 1e-12:
            raise ValueError(
                f"splitter port transmissions sum to {total:.4f} > 1; "
                "insertion losses are inconsistent")
        pdl = tuple(self.pdl) if self.pdl else tuple(PdlElement(0.0) for _ in range(self.n_ports))
        if len(pdl) != self.n_ports:
            raise ValueError(
                f"splitter.pdl: expected {self.n_ports} entries, got {len(pdl)}")
        object.__setattr__(self, "insertion_loss_db", losses)
        object.__setattr__(self, "pdl", pdl)

    def transmission(self, port: int) -> float:
        return 10.0 ** (-self.insertion_loss_db[port] / 10.0)

    @property
    def transmissions(self) -> np.ndarray:
        return 10.0 ** (-np.asarray(self.insertion_loss_db) / 10.0)


@dataclass(frozen=True)
class SplitterPort:
    """One traversed output port of a splitter, as a path element."""

    port: int
    insertion_loss_db: float
    pdl: PdlElement


@dataclass(frozen=True)
class TopologySpec:
    """Declarative description of a network layout (the validated config view)."""

    kind: str
    mu_convention: str
    mu_value: float
    drop_kms: tuple = (0.0,)
    feeder_km: float = 0.0
    atten_db_per_km: float = FIBER_ATTEN_DB_PER_KM
    splitter: SplitterModel | None = None

    def __post_init__(self):
        if self.kind not in TOPOLOGY_KINDS:
            raise ValueError(f"topology.kind must be one of {TOPOLOGY_KINDS}, got {self.kind!r}")
        if self.mu_convention not in MU_CONVENTIONS:
            raise ValueError(
                f"topology.mu_convention must be one of {MU_CONVENTIONS}, got {self.mu_convention!r}")
        if not (self.mu_value > 0):
            raise ValueError(f"topology.mu must be > 0, got {self.mu_value}")
        if self.kind == "single_receiver":
            if self.splitter is not None:
                raise ValueError("single_receiver topology takes no splitter")
            if len(self.drop_kms) != 1:
                raise ValueError("single_receiver topology takes exactly one fiber length")
        else:
            if self.splitter is None:
                raise ValueError(f"{self.kind} topology requires a splitter")
            if len(self.drop_kms) != self.splitter.n_ports:
                raise ValueError(
                    f"topology.fiber_km: expected {self.splitter.n_ports} lengths "
                    f"(one per port), got {len(self.drop_kms)}")
        if self.kind != "p2mp_pon" and self.feeder_km:
            raise ValueError(f"feeder_km only applies to p2mp_pon, got kind={self.kind!r}")


@dataclass(frozen=True)
class ChannelPath:
    """The ordered optical elements between transmitter and one receiver.

    ``elements`` is the full physical path (used for loss budgets);
    ``sim_elements`` excludes everything upstream of the point where the mean
    photon number is referenced, plus the splitter port's scalar loss when
    that loss is already folded into the per-arm mean.  Monte Carlo photon
    streams are launched at the reference point and propagated through
    ``sim_elements`` only.
    """

    receiver: int
    elements: tuple
    sim_elements: tuple

    @property
    def delay_s(self) -> float:
        return sum(e.delay_s for e in self.elements if isinstance(e, FiberSpan))

    @property
    def length_km(self) -> float:
        return sum(e.length_km for e in self.elements if isinstance(e, FiberSpan))


@dataclass(frozen=True)
class Topology:
    """A built network: spec plus one ChannelPath per receiver."""

    spec: TopologySpec
    paths: tuple

    @property
    def n_receivers(self) -> int:
        return len(self.paths)

    @property
    def splitter(self) -> SplitterModel | None:
        return self.spec.splitter


def build_topology(spec: TopologySpec) -> Topology:
    """Materialize per-receiver channel paths from a topology description.

    The per-arm photon-number reference point (see ``effective_mu``) sits just
    after the splitter's scalar insertion loss, so ``sim_elements`` keeps the
    port's PDL element (polarization effects still apply photon by photon) but
    drops its scalar loss and any upstream feeder span.
    """
    atten = spec.atten_db_per_km
    if spec.kind == "single_receiver":
        span = FiberSpan(spec.drop_kms[0], atten)
        path = ChannelPath(0, (span,), (span,))
        return Topology(spec, (path,))

    splitter = spec.splitter
    paths = []
    feeder = FiberSpan(spec.feeder_km, atten) if spec.kind == "p2mp_pon" else None
    for port in range(splitter.n_ports):
        port_elem = SplitterPort(port, splitter.insertion_loss_db[port], splitter.pdl[port])
        drop = FiberSpan(spec.drop_kms[port], atten)
        full = (feeder, port_elem, drop) if feeder is not None else (port_elem, drop)
        sim_port = replace(port_elem, insertion_loss_db=0.0)
        paths.append(ChannelPath(port, full, (sim_port, drop)))
    return Topology(spec, tuple(paths))


def path_loss_db(topology: Topology, receiver: int) -> float:
    """Total scalar loss along a receiver's path, in dB.

    Sums fiber attenuation, splitter-port insertion loss and PDL-element
    excess loss.  The polarization-dependent part of PDL elements is excluded
    (it depends on the traversing state).
    """
    total = 0.0
    for elem in topology.paths[receiver].elements:
        if isinstance(elem, FiberSpan):
            total += elem.loss_db
        elif isinstance(elem, SplitterPort):
            total += elem.insertion_loss_db + elem.pdl.excess_loss_db
        else:
            raise TypeError(f"unknown path element {elem!r}")
    return total


def effective_mu(topology: Topology, receiver: int) -> float:
    """Per-arm mean photon number for one receiver.

    With the ``per_arm`` convention the configured value is already the mean
    entering each receiver's arm (set after the splitter).  With ``aggregate``
    the configured value is the mean at the splitter input and each arm gets
    its share through the port's insertion loss.  Always strictly positive,
    and the aggregate convention never exceeds the per-arm one for the same
    configured value.
    """
    spec = topology.spec
    if spec.kind == "single_receiver" or spec.mu_convention == "per_arm":
        return spec.mu_value
    return spec.mu_value * topology.splitter.transmission(receiver)


def route_splitter(n_photons: int, splitter: SplitterModel, rng) -> np.ndarray:
    """Route photons at a splitter input to output ports.

    Each photon independently lands on port ``i`` with probability equal to
    that port's insertion-loss transmission, or is lost (returned as -1) with
    the remaining probability.  Returns an int array of port indices.
    """
    edges = np.cumsum(splitter.transmissions)
    u = rng.random(n_photons)
    ports = np.searchsorted(edges, u)
    return np.where(ports < splitter.n_ports, ports, -1)


def propagate(times_s, angles_deg, elements, rng):
    """Propagate a photon batch through an ordered element sequence.

    Scalar losses become independent per-photon Bernoulli survival trials;
    PDL elements additionally rotate each survivor's polarization angle and
    apply an intensity-ratio Bernoulli trial.  Fiber spans add their group
    delay to the arrival times.  Returns ``(times, angles, survivor_index)``
    where ``survivor_index`` maps surviving photons back into the input batch.
    """
    times = np.asarray(times_s, dtype=float)
    angles = np.asarray(angles_deg, dtype=float)
    idx = np.arange(times.size)
    for elem in elements:
        if times.size == 0:
            break
        if isinstance(elem, FiberSpan):
            times = times + elem.delay_s
            p = 10.0 ** (-elem.loss_db / 10.0)
            if p < 1.0:
                keep = rng.random(times.size) < p
                times, angles, idx = times[keep], angles[keep], idx[keep]
        elif isinstance(elem, SplitterPort):
            scalar_db = elem.insertion_loss_db + elem.pdl.excess_loss_db
            p = 10.0 ** (-scalar_db / 10.0)
            if p < 1.0:
                keep = rng.random(times.size) < p
                times, angles, idx = times[keep], angles[keep], idx[keep]
            if elem.pdl.pdl_db > 0.0 and times.size:
                theta = (angles - elem.pdl.axis_deg) % 360.0
                factor = pdl_intensity_factor(theta, elem.pdl.pdl_db)
                keep = rng.random(times.size) < factor
                theta = theta[keep]
                times, idx = times[keep], idx[keep]
                angles = (pdl_rotate_angle(theta, elem.pdl.pdl_db) + elem.pdl.axis_deg) % 360.0
        else:
            raise TypeError(f"unknown path element {elem!r}")
    return times, angles, idx
