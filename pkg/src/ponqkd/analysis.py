"""Network-level analyses: shared-bit security, PDL penalties, reach limits.

These routines operate at the level of closed-form rate formulas or
slot-synchronous Monte Carlo, independent of the photon-by-photon link
simulation in :mod:`ponqkd.runner`.
"""

import math
from dataclasses import dataclass

import numpy as np

from .channel import FiberSpan, SplitterPort, Topology
from .polarization import pdl_intensity_pair, pdl_rotate_angle, relative_angle_deg
from .protocol import (LinkCalibration, eve_info, net_rate_factor,
                       qber_extrapolate, sifted_rate_pdl, zero_rate_qber)

__all__ = [
    "SharedBitReport",
    "PdlSweepPoint",
    "PdlSweepResult",
    "CompensationResult",
    "multiphoton_rate",
    "chain_shared_rate",
    "hbt_port_probs",
    "hbt_coincidences",
    "pa_shared_discount",
    "pdl_penalty_sweep",
    "pdl_compensate",
    "max_distance",
    "zero_rate_limit_45",
]


def multiphoton_rate(pulse_rate_hz: float, n_ports: int, beta: float, eta: float,
                     mu: float) -> float:
    """Closed-form rate of sifted bits shared between receivers of one splitter.

    With per-port registration probability
    ``p = (1 - exp(-beta * eta * mu / n_ports)) / 4`` (a port sees at least
    one detected photon and the slot passes the unambiguous-detection gate),
    the shared-bit rate is ``pulse_rate * sum_{i=2..N} p^i``: the i-th term is
    the probability that i specific receivers all register the same pulse.
    """
    if n_ports < 2:
        raise ValueError(f"sharing needs >= 2 ports, got {n_ports}")
    if mu < 0 or beta < 0 or eta < 0:
        raise ValueError("mu, beta and eta must be >= 0")
    p = 0.25 * (1.0 - math.exp(-beta * eta * mu / n_ports))
    return pulse_rate_hz * sum(p ** i for i in range(2, n_ports + 1))


def chain_shared_rate(pulse_rate_hz: float, port_probs) -> float:
    """Generalization of ``multiphoton_rate`` to unequal port probabilities.

    ``port_probs`` lists per-port registration probabilities in chain order
    (observed pair first); the rate is ``f * sum_i prod_{j<=i} p_j`` over
    chains of length 2 and up.
    """
    probs = list(port_probs)
    if len(probs) < 2:
        raise ValueError("need at least two ports")
    total = 0.0
    running = probs[0]
    for p in probs[1:]:
        running *= p
        total += running
    return pulse_rate_hz * total


@dataclass(frozen=True)
class SharedBitReport:
    """Monte Carlo estimate of multi-photon bit sharing on one splitter."""

    mu: float
    n_slots: int
    clock_hz: float
    ports: tuple
    pairwise_shared_rate_cps: float
    single_receiver_rate_cps: float
    pairwise_percent: float
    network_percent: float
    shared_rate_se_cps: float  # standard error of the MC shared rate


def _hbt_setup(topology: Topology, ports, mu_input: float,
               detector_efficiency: float):
    """Validate a coincidence configuration and precompute per-arm optics.

    Returns ``(splitter, i, j, arm, chain)`` where ``arm`` is each port's
    post-splitter scalar transmission (detector included) and ``chain`` lists
    the ports in coincidence order: the observed pair first, then the rest.
    """
    splitter = topology.splitter
    if splitter is None:
        raise ValueError("shared-bit analysis requires a splitter topology")
    i, j = int(ports[0]), int(ports[1])
    if i == j:
        raise ValueError(f"observed ports must differ, got ({i}, {j})")
    n = splitter.n_ports
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"observed ports must be in [0, {n}), got ({i}, {j})")
    if mu_input < 0:
        raise ValueError(f"mu_input must be >= 0, got {mu_input}")
    arm = np.empty(n)
    for port in range(n):
        drop_db = 0.0
        for elem in topology.paths[port].sim_elements:
            if isinstance(elem, FiberSpan):
                drop_db += elem.loss_db
            elif isinstance(elem, SplitterPort):
                drop_db += elem.pdl.excess_loss_db
        arm[port] = 10.0 ** (-drop_db / 10.0) * detector_efficiency
    chain = [i, j] + [k for k in range(n) if k not in (i, j)]
    return splitter, i, j, arm, chain


def hbt_port_probs(topology: Topology, ports, mu_input: float,
                   detector_efficiency: float = 1.0) -> list:
    """Per-slot gated registration probability of each port, in chain order.

    Port ``k`` registers when at least one of the slot's photons reaches its
    detector and the slot passes the port's 1/4 unambiguous-detection gate:
    ``p_k = (1 - exp(-mu * t_k * arm_k)) / 4``.  Feeding the result to
    ``chain_shared_rate`` gives the closed-form prediction matching
    ``hbt_coincidences`` on the same topology.
    """
    splitter, _, _, arm, chain = _hbt_setup(topology, ports, mu_input,
                                            detector_efficiency)
    t = splitter.transmissions
    return [0.25 * (1.0 - math.exp(-mu_input * t[k] * arm[k])) for k in chain]


def hbt_coincidences(topology: Topology, ports, mu_input: float, n_slots: int,
                     rng, clock_hz: float = 1e9, detector_efficiency: float = 1.0,
                     block_slots: int = 1_000_000) -> SharedBitReport:
    """Slot-synchronous coincidence Monte Carlo between two splitter ports.

    Per slot, a Poisson number of photons (mean ``mu_input`` at the splitter
    input) is routed to ports by the measured insertion losses, thinned by
    each arm's downstream transmission and the detector efficiency.  A port
    registers a sifted bit when it received at least one photon and the slot
    passes that port's 1/4 unambiguous-detection gate.  The shared count per
    slot follows the series convention of ``multiphoton_rate``: the observed
    pair both registering contributes 1, each longer chain (pair plus the
    remaining ports in index order) contributes another 1, so the estimator's
    expectation matches the closed form term by term.

    The single-receiver rate is measured at the first observed port.
    """
    splitter, i, j, arm, chain = _hbt_setup(topology, ports, mu_input,
                                            detector_efficiency)
    n = splitter.n_ports
    edges = np.cumsum(splitter.transmissions)

    shared_sum = 0
    shared_sq_sum = 0
    single_sum = 0
    done = 0
    while done < n_slots:
        m = min(block_slots, n_slots - done)
        counts = rng.poisson(mu_input, m)
        total = int(counts.sum())
        registered = np.zeros((m, n), dtype=bool)
        if total:
            photon_slot = np.repeat(np.arange(m), counts)
            port = np.searchsorted(edges, rng.random(total))
            routed = port < n
            surv = np.zeros(total, dtype=bool)
            if routed.any():
                surv[routed] = rng.random(int(routed.sum())) < arm[port[routed]]
            registered[photon_slot[surv], port[surv]] = True
        # One independent 1/4 gate per (slot, port); cells without a photon
        # never pass regardless, so gates are drawn only where needed.
        rows, cols = np.nonzero(registered)
        failed = rng.random(rows.size) >= 0.25
        registered[rows[failed], cols[failed]] = False
        prefix = np.logical_and.accumulate(registered[:, chain], axis=1)
        weights = prefix[:, 1:].sum(axis=1)
        shared_sum += int(weights.sum())
        shared_sq_sum += int((weights.astype(np.int64) ** 2).sum())
        single_sum += int(registered[:, i].sum())
        done += m

    mean_w = shared_sum / n_slots
    var_w = max(0.0, shared_sq_sum / n_slots - mean_w ** 2)
    shared_rate = clock_hz * mean_w
    se = clock_hz * math.sqrt(var_w / n_slots)
    single_rate = clock_hz * single_sum / n_slots
    percent = 100.0 * shared_sum / single_sum if single_sum else 0.0
    return SharedBitReport(mu_input, n_slots, clock_hz, (i, j), shared_rate,
                           single_rate, percent, percent * (n - 1), se)


def pa_shared_discount(report: SharedBitReport, net_rate_bps: float) -> float:
    """Net rate after discounting bits plausibly shared with other receivers.

    Scales the distilled rate by ``1 - network_percent/100``, where the
    network percentage extrapolates the pairwise sharing to all N-1 other
    receivers.  A report with no sharing leaves the rate unchanged.
    """
    if net_rate_bps < 0:
        raise ValueError(f"net_rate_bps must be >= 0, got {net_rate_bps}")
    factor = 1.0 - report.network_percent / 100.0
    if factor < 0:
        raise ValueError(
            f"network shared percentage {report.network_percent:.2f}% >= 100%; "
            "privacy amplification cannot keep up")
    return net_rate_bps * factor


@dataclass(frozen=True)
class PdlSweepPoint:
    """One orientation of the state pair relative to a PDL element's axis."""

    a_deg: float
    b_deg: float
    alpha_prime_deg: float
    intensity1: float  # transmission of the bit-1 state (angle a)
    intensity0: float  # transmission of the bit-0 state (angle b)
    net_rate_relative: float  # net rate relative to the PDL-free baseline


@dataclass(frozen=True)
class PdlSweepResult:
    points: tuple
    average_decrease_pct: float
    clipped_points: int  # orientations driven to zero net rate


def _net_relative(a_deg: float, qber: float, pdl_db: float, alpha0_deg: float,
                  formula: str, baseline: float):
    """Net rate at pair orientation ``a`` relative to the PDL-free baseline."""
    b_deg = a_deg + alpha0_deg
    ap = pdl_rotate_angle(a_deg, pdl_db)
    bp = pdl_rotate_angle(b_deg, pdl_db)
    alpha_p = relative_angle_deg(ap, bp)
    i1, i0 = pdl_intensity_pair(a_deg, b_deg, pdl_db, formula)
    sift_rel = sifted_rate_pdl(alpha_p, i0, i1)
    factor = net_rate_factor(qber, eve_info(alpha_p))
    net = sift_rel * max(0.0, factor) / baseline
    return PdlSweepPoint(a_deg % 360.0, b_deg % 360.0, alpha_p, i1, i0, net), factor


def _pdl_baseline(qber: float, alpha0_deg: float) -> float:
    return (sifted_rate_pdl(alpha0_deg, 1.0, 1.0)
            * net_rate_factor(qber, eve_info(alpha0_deg)))


def pdl_penalty_sweep(qber: float, pdl_db: float, alpha0_deg: float = 45.0,
                      grid_deg: float = 1.0, axis_deg: float = 0.0,
                      formula: str = "corrected") -> PdlSweepResult:
    """Average net-rate penalty of a PDL element over pair orientations.

    Sweeps the bit-1 state angle ``a`` uniformly over [0, 360) (measured in
    the global frame, with the element's high-loss axis at ``axis_deg``),
    keeping the pair separation at ``alpha0``.  Each orientation's net rate —
    reduced sifted fraction times the distillation factor at the delivered
    separation's eavesdropper information — is compared against the PDL-free
    baseline at the same QBER.  Returns per-orientation points and the
    grid-average percentage decrease.

    Orientations whose distillation factor is driven to or below zero are
    clipped at zero rate and counted in ``clipped_points``.
    """
    if not (grid_deg > 0):
        raise ValueError(f"grid_deg must be > 0, got {grid_deg}")
    baseline = _pdl_baseline(qber, alpha0_deg)
    if baseline <= 0:
        raise ValueError(
            f"qber={qber} is at or beyond the zero-rate bound for separation {alpha0_deg} deg")
    n = int(round(360.0 / grid_deg))
    points = []
    clipped = 0
    total_decrease = 0.0
    for k in range(n):
        a_global = k * grid_deg
        point, factor = _net_relative(a_global - axis_deg, qber, pdl_db,
                                      alpha0_deg, formula, baseline)
        point = PdlSweepPoint((a_global) % 360.0, (a_global + alpha0_deg) % 360.0,
                              point.alpha_prime_deg, point.intensity1,
                              point.intensity0, point.net_rate_relative)
        if factor <= 0:
            clipped += 1
        points.append(point)
        total_decrease += 1.0 - point.net_rate_relative
    return PdlSweepResult(tuple(points), 100.0 * total_decrease / n, clipped)


@dataclass(frozen=True)
class CompensationResult:
    """Best transmitter orientations against a characterized PDL element.

    ``best_*`` maximizes the net rate; ``loss_min_*`` is the orientation a
    loss-monitoring feedback loop settles on (maximum delivered intensity).
    Decreases are relative to the PDL-free baseline; negative means gain.
    """

    best_a_deg: float
    best_b_deg: float
    best_alpha_prime_deg: float
    best_decrease_pct: float
    loss_min_a_deg: float
    loss_min_b_deg: float
    loss_min_decrease_pct: float


def pdl_compensate(qber: float, pdl_db: float, alpha0_deg: float = 45.0,
                   grid_deg: float = 1.0, formula: str = "corrected") -> CompensationResult:
    """Pick launch orientations that best exploit a known PDL element.

    Maximizing the net rate trades delivered intensity against the enlarged
    state separation's eavesdropper information, so at high QBER the optimum
    shrinks the separation below its nominal value and can beat the PDL-free
    baseline.  Also reports the orientation that merely minimizes loss.
    """
    baseline = _pdl_baseline(qber, alpha0_deg)
    if baseline <= 0:
        raise ValueError(
            f"qber={qber} is at or beyond the zero-rate bound for separation {alpha0_deg} deg")
    n = int(round(360.0 / grid_deg))
    best = None
    loss_min = None
    for k in range(n):
        a = k * grid_deg
        point, _ = _net_relative(a, qber, pdl_db, alpha0_deg, formula, baseline)
        if best is None or point.net_rate_relative > best.net_rate_relative:
            best = point
        total_i = point.intensity0 + point.intensity1
        if loss_min is None or total_i > loss_min[0]:
            loss_min = (total_i, point)
    lm = loss_min[1]
    return CompensationResult(best.a_deg, best.b_deg, best.alpha_prime_deg,
                              100.0 * (1.0 - best.net_rate_relative),
                              lm.a_deg, lm.b_deg,
                              100.0 * (1.0 - lm.net_rate_relative))


def max_distance(cal: LinkCalibration, port_loss_db: float,
                 atten_db_per_km: float = 2.2, clock_hz: float | None = None,
                 qber_limit: float | None = None, tol_km: float = 0.01) -> float:
    """Longest drop-fiber length keeping the extrapolated QBER within a limit.

    The sifted rate scales from the calibrated reference by the extra port
    loss and fiber attenuation (and proportionally with the clock, if given);
    the QBER then follows the calibrated ``kappa + D/(2B)`` law.  The
    crossing is bracketed and bisected to ``tol_km``.  The default limit is
    the zero-rate QBER of a 45-deg-separation link.
    """
    if qber_limit is None:
        qber_limit = zero_rate_limit_45()
    if not (atten_db_per_km > 0):
        raise ValueError(f"atten_db_per_km must be > 0, got {atten_db_per_km}")

    clock_gain = 1.0 if clock_hz is None else clock_hz / cal.reference_clock_hz

    def rate_at(km: float) -> float:
        delta_db = (port_loss_db - cal.reference_port_loss_db
                    + atten_db_per_km * (km - cal.reference_distance_km))
        return cal.reference_rate_bps * clock_gain * 10.0 ** (-delta_db / 10.0)

    if qber_extrapolate(cal, rate_at(0.0)) > qber_limit:
        raise ValueError(
            f"link already exceeds QBER limit {qber_limit:.4f} at zero distance")
    lo, hi = 0.0, 1.0
    while qber_extrapolate(cal, rate_at(hi)) <= qber_limit:
        hi *= 2.0
        if hi > 1e5:
            raise ValueError("QBER never reaches the limit within 1e5 km; "
                             "check dark noise and attenuation")
    while hi - lo > tol_km:
        mid = 0.5 * (lo + hi)
        if qber_extrapolate(cal, rate_at(mid)) <= qber_limit:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def zero_rate_limit_45() -> float:
    """Zero-rate QBER for the nominal 45-deg separation (the default limit)."""
    return zero_rate_qber(eve_info(45.0))
