"""End-to-end Monte Carlo link runs and parameter sweeps.

One link run walks the full chain: random bit sequence -> pulsed emission ->
channel propagation -> detection (plus dark counts) -> temporal filtering ->
receiver measurement -> per-slot sifting.  Every random draw comes from a
generator derived from the master seed and a stream label, so any sweep point
can be reproduced in isolation.
"""

import math
import zlib
from dataclasses import dataclass, replace

import numpy as np

from .channel import (FiberSpan, SplitterPort, build_topology, effective_mu,
                      propagate)
from .config import ScenarioConfig
from .photonics import PhotonBatch, detect, emit_pulses, temporal_filter
from .polarization import pdl_rotate_angle, relative_angle_deg
from .protocol import (RateReport, SiftedKeyStats, alice_sequence, eve_info,
                       measure_batch, net_rate, resolve_slots, sift)

__all__ = [
    "derive_rng",
    "delivered_states",
    "LinkRunResult",
    "run_link",
    "sweep_distance",
    "sweep_clock",
]


def derive_rng(master_seed: int, *stream) -> np.random.Generator:
    """Build a generator on an independent stream below the master seed.

    ``stream`` parts become SeedSequence spawn-key words: integers are masked
    to 32 bits, strings are hashed with CRC-32.  The same (seed, stream) pair
    always yields the same generator, and distinct streams are statistically
    independent.
    """
    if master_seed < 0:
        raise ValueError(f"master_seed must be >= 0, got {master_seed}")
    words = []
    for part in stream:
        if isinstance(part, str):
            words.append(zlib.crc32(part.encode("utf-8")) & 0xFFFFFFFF)
        elif isinstance(part, (int, np.integer)):
            words.append(int(part) & 0xFFFFFFFF)
        else:
            raise TypeError(f"stream parts must be int or str, got {part!r}")
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(words))
    return np.random.default_rng(seq)


def delivered_states(source, path) -> tuple:
    """Protocol state angles as they arrive at one receiver.

    Polarization-dependent loss along the path rotates both states toward the
    element's low-loss axis; the receiver's two tests must be aligned to the
    delivered states, not the launched ones.  Returns ``(state1_deg,
    state0_deg)``.
    """
    s1 = source.angle_bit1_deg % 360.0
    s0 = source.angle_bit0_deg % 360.0
    for elem in path.sim_elements:
        if isinstance(elem, SplitterPort) and elem.pdl.pdl_db > 0.0:
            axis = elem.pdl.axis_deg
            s1 = (float(pdl_rotate_angle((s1 - axis) % 360.0, elem.pdl.pdl_db)) + axis) % 360.0
            s0 = (float(pdl_rotate_angle((s0 - axis) % 360.0, elem.pdl.pdl_db)) + axis) % 360.0
    return s1, s0


@dataclass(frozen=True)
class LinkRunResult:
    """Everything measured in one (possibly multi-trial) link run."""

    receiver: int
    n_slots: int
    trials: int
    clock_hz: float
    window_s: float
    arm_mu: float
    delivered_state1_deg: float
    delivered_state0_deg: float
    delivered_separation_deg: float
    n_emitted: int
    n_arrived: int
    n_detected: int
    n_kept: int
    n_discarded: int
    n_conclusive_events: int
    stats: SiftedKeyStats
    rates: RateReport

    @property
    def conclusive_fraction(self) -> float:
        """Conclusive measurement events per filtered detection event."""
        return self.n_conclusive_events / self.n_kept if self.n_kept else math.nan


def run_link(config: ScenarioConfig, receiver: int | None = None,
             seed: int | None = None, stream: tuple = ()) -> LinkRunResult:
    """Simulate the protocol end to end for one receiver.

    ``seed`` falls back to ``run.seed``; ``stream`` namespaces the run so
    sweep drivers can give every point an independent substream.  Multiple
    trials (``run.trials``) are concatenated into one long key before the
    error accounting, which keeps all counts exact integers.
    """
    if seed is None:
        seed = config.run.seed
    if seed is None:
        raise ValueError("a master seed is required: set run.seed or pass --seed")
    rx = config.run.receiver if receiver is None else receiver
    topology = build_topology(config.topology)
    if not (0 <= rx < topology.n_receivers):
        raise ValueError(f"receiver {rx} out of range (topology has "
                         f"{topology.n_receivers})")
    source = config.source
    detector = config.detector
    n_slots = config.run.n_slots
    trials = config.run.trials
    clock = source.clock_hz
    window = config.window_s()
    path = topology.paths[rx]
    arm_mu = effective_mu(topology, rx)
    s1, s0 = delivered_states(source, path)
    separation = float(relative_angle_deg(s1, s0))
    sim_delay = sum(e.delay_s for e in path.sim_elements if isinstance(e, FiberSpan))
    duration = n_slots / clock

    n_emitted = n_arrived = n_detected = n_kept = n_discarded = n_conclusive = 0
    bits_parts, outcome_parts = [], []
    conflicts = 0
    for trial in range(trials):
        rng = derive_rng(seed, *stream, "link", rx, trial)
        bits, _ = alice_sequence(n_slots, source, rng)
        pulses = emit_pulses(bits, source, rng, mu_override=arm_mu)
        times, angles, idx = propagate(pulses.time_s, pulses.angle_deg,
                                       path.sim_elements, rng)
        arrivals = PhotonBatch(pulses.origin_slot[idx], times - sim_delay,
                               angles, pulses.leaked[idx])
        events = detect(arrivals, detector, duration, rng)
        kept, slots, discarded = temporal_filter(events, clock, window, n_slots)
        conclusive, rx_bits = measure_batch(kept.angle_deg, s0, s1, rng)
        wrong_slot = (kept.origin_slot != slots) & ~kept.is_dark
        outcome = resolve_slots(slots, conclusive, rx_bits, kept.is_dark,
                                wrong_slot, kept.leaked)

        n_emitted += pulses.size
        n_arrived += arrivals.size
        n_detected += events.size
        n_kept += kept.size
        n_discarded += discarded
        n_conclusive += int(conclusive.sum())
        bits_parts.append(bits)
        outcome_parts.append((outcome[0] + trial * n_slots,) + outcome[1:5])
        conflicts += outcome[5]

    all_bits = bits_parts[0] if trials == 1 else np.concatenate(bits_parts)
    merged = tuple(np.concatenate([p[k] for p in outcome_parts]) for k in range(5))
    stats = sift(all_bits, merged + (conflicts,), clock, n_slots * trials)
    rates = net_rate(stats, eve_info(separation))
    return LinkRunResult(rx, n_slots, trials, clock, window, arm_mu, s1, s0,
                         separation, n_emitted, n_arrived, n_detected, n_kept,
                         n_discarded, n_conclusive, stats, rates)


def sweep_distance(config: ScenarioConfig, seed: int | None = None) -> list:
    """Run the link at each distance in ``analysis.distances_km``.

    Every drop span is set to the swept length (the feeder, if any, stays
    fixed).  Returns ``[(distance_km, LinkRunResult), ...]``.
    """
    results = []
    n_drops = len(config.topology.drop_kms)
    for i, d in enumerate(config.analysis.distances_km):
        spec = replace(config.topology, drop_kms=(float(d),) * n_drops)
        cfg = replace(config, topology=spec)
        results.append((float(d), run_link(cfg, seed=seed, stream=("distance", i))))
    return results


def sweep_clock(config: ScenarioConfig, seed: int | None = None) -> list:
    """Run the link at each pulse rate in ``analysis.clocks_hz``.

    The acceptance window follows the clock when left at its default (half a
    period); an explicit ``detector.window_s`` is kept as configured and must
    fit inside the shortest swept period.  Returns ``[(clock_hz,
    LinkRunResult), ...]``.
    """
    results = []
    for i, c in enumerate(config.analysis.clocks_hz):
        cfg = replace(config, source=replace(config.source, clock_hz=float(c)))
        results.append((float(c), run_link(cfg, seed=seed, stream=("clock", i))))
    return results
