"""Two-nonorthogonal-state (B92) protocol logic and key-rate accounting.

The transmitter encodes each random bit as one of two linear polarization
states separated by ``alpha`` degrees (45 by default).  The receiver applies,
uniformly at random per detected photon, one of two projective tests, each of
which can only fire for the state that is *not* orthogonal to its axis.  A
click is therefore unambiguous: for an ideal separation the conclusive
probability per detected photon is sin^2(alpha)/2, i.e. 1/4 at 45 deg.

Key distillation scales the sifted rate by a factor combining error
correction (with a 7/2-per-error leakage coefficient) and privacy
amplification against the optimal individual unambiguous-discrimination
attack, whose information gain on conclusive bits is ``1 - cos(alpha)``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .photonics import QberBreakdown, qber_components

__all__ = [
    "SiftedKeyStats",
    "RateReport",
    "LinkCalibration",
    "alice_sequence",
    "bob_measure",
    "measure_batch",
    "resolve_slots",
    "sift",
    "eve_info",
    "net_rate_factor",
    "net_rate",
    "zero_rate_qber",
    "sifted_rate_pdl",
    "qber_extrapolate",
]


@dataclass(frozen=True)
class SiftedKeyStats:
    """Outcome of sifting one run; ``empty`` signals zero conclusive slots.

    ``qber`` and the per-cause fractions are NaN for an empty key.  Fractions
    come from a mutually exclusive error decomposition, so they always sum to
    ``qber`` (and the underlying integer counts sum to ``error_count``).
    """

    sifted_count: int
    sifted_rate_bps: float
    error_count: int
    qber: float
    qber_leak: float
    qber_dark: float
    qber_jitter: float
    conflict_slots: int = 0

    @property
    def empty(self) -> bool:
        return self.sifted_count == 0

    @staticmethod
    def from_breakdown(b: QberBreakdown, clock_hz: float, n_slots: int,
                       conflict_slots: int = 0) -> "SiftedKeyStats":
        rate = b.sifted_count * clock_hz / n_slots
        return SiftedKeyStats(b.sifted_count, rate, b.error_count, b.qber,
                              b.leak_fraction, b.dark_fraction, b.jitter_fraction,
                              conflict_slots)


@dataclass(frozen=True)
class RateReport:
    """Net (distilled) key rate and the quantities that produced it."""

    sifted_rate_bps: float
    qber: float
    eve_info: float
    distillation_factor: float
    net_rate_bps: float


@dataclass(frozen=True)
class LinkCalibration:
    """Measured anchor point of a deployed link, for rate extrapolation.

    ``kappa`` is the rate-independent error floor (optical misalignment and
    encoder extinction), ``dark_noise_cps`` the dark-noise rate entering the
    sifted key, and ``reference_rate_bps`` the sifted bit rate measured at a
    receiver located ``reference_distance_km`` downstream of a port with
    ``reference_port_loss_db`` insertion loss, clocked at
    ``reference_clock_hz``.
    """

    kappa: float
    dark_noise_cps: float
    reference_rate_bps: float
    reference_distance_km: float = 0.0
    reference_port_loss_db: float = 0.0
    reference_clock_hz: float = 1e9
    note: str = ""

    def __post_init__(self):
        if not (0.0 <= self.kappa < 0.5):
            raise ValueError(f"kappa must be in [0, 0.5), got {self.kappa}")
        if self.dark_noise_cps < 0:
            raise ValueError(f"dark_noise_cps must be >= 0, got {self.dark_noise_cps}")
        if not (self.reference_rate_bps > 0):
            raise ValueError(f"reference_rate_bps must be > 0, got {self.reference_rate_bps}")
        if not (self.reference_clock_hz > 0):
            raise ValueError(f"reference_clock_hz must be > 0, got {self.reference_clock_hz}")


def alice_sequence(n_slots: int, source, rng):
    """Draw the transmitter's random bit sequence and its encoding angles.

    Returns ``(bits, angles_deg)`` as arrays of length ``n_slots``; bit 1 maps
    to ``source.angle_bit1_deg`` and bit 0 to ``source.angle_bit0_deg``.
    """
    if n_slots < 1:
        raise ValueError(f"n_slots must be >= 1, got {n_slots}")
    bits = rng.integers(0, 2, n_slots, dtype=np.uint8)
    angles = np.where(bits == 1, source.angle_bit1_deg, source.angle_bit0_deg)
    return bits, angles


def measure_batch(angles_deg, state0_deg: float, state1_deg: float, rng):
    """Vectorized receiver measurement of detected photons.

    For each photon one of the two tests is chosen uniformly; the test for
    bit ``v`` projects onto the direction orthogonal to the *other* protocol
    state, so it clicks with probability sin^2 of the photon's angle to that
    other state.  Returns ``(conclusive_mask, bits)``.
    """
    angles = np.asarray(angles_deg, dtype=float)
    tested = rng.integers(0, 2, angles.size, dtype=np.uint8)
    other = np.where(tested == 1, state0_deg, state1_deg)
    click_p = np.sin(np.radians(angles - other)) ** 2
    conclusive = rng.random(angles.size) < click_p
    return conclusive, tested


def bob_measure(arrival_angle_deg: float, rng,
                state0_deg: float = 22.5, state1_deg: float = -22.5):
    """Measure a single detected photon; returns the bit or None if inconclusive."""
    conclusive, bits = measure_batch([arrival_angle_deg], state0_deg, state1_deg, rng)
    return int(bits[0]) if conclusive[0] else None


def resolve_slots(assigned_slots, conclusive, bits, is_dark, wrong_slot, leaked):
    """Collapse per-event measurement results into per-slot outcomes.

    A slot becomes conclusive when at least one of its events is conclusive
    and all conclusive events agree on the bit; disagreeing slots are dropped
    as inconclusive.  Cause flags are OR-reduced over the slot's conclusive
    events.  Returns ``(slots, bits, dark_flag, wrong_slot_flag, leak_flag,
    n_conflicts)`` sorted by slot.
    """
    conclusive = np.asarray(conclusive, dtype=bool)
    slots = np.asarray(assigned_slots)[conclusive]
    if slots.size == 0:
        empty = np.array([], dtype=np.int64)
        ebool = np.array([], dtype=bool)
        return empty, empty.astype(np.uint8), ebool, ebool, ebool, 0
    bits = np.asarray(bits, dtype=np.uint8)[conclusive]
    is_dark = np.asarray(is_dark, dtype=bool)[conclusive]
    wrong_slot = np.asarray(wrong_slot, dtype=bool)[conclusive]
    leaked = np.asarray(leaked, dtype=bool)[conclusive]

    order = np.argsort(slots, kind="stable")
    slots, bits = slots[order], bits[order]
    is_dark, wrong_slot, leaked = is_dark[order], wrong_slot[order], leaked[order]
    uniq, start = np.unique(slots, return_index=True)
    bit_min = np.minimum.reduceat(bits, start)
    bit_max = np.maximum.reduceat(bits, start)
    dark_any = np.bitwise_or.reduceat(is_dark, start)
    wrong_any = np.bitwise_or.reduceat(wrong_slot, start)
    leak_any = np.bitwise_or.reduceat(leaked, start)
    agree = bit_min == bit_max
    n_conflicts = int((~agree).sum())
    return (uniq[agree], bit_min[agree], dark_any[agree],
            wrong_any[agree], leak_any[agree], n_conflicts)


def sift(alice_bits, slot_outcomes, clock_hz: float, n_slots: int) -> SiftedKeyStats:
    """Compare conclusive slots against the sent bits and tally errors.

    ``slot_outcomes`` is the tuple from ``resolve_slots``.  An empty key is a
    valid outcome (all-NaN error fields), not an error.
    """
    slots, bits, dark_any, wrong_any, leak_any, conflicts = slot_outcomes
    if slots.size == 0:
        return SiftedKeyStats(0, 0.0, 0, math.nan, math.nan, math.nan, math.nan, conflicts)
    alice_bits = np.asarray(alice_bits, dtype=np.uint8)
    errors = bits != alice_bits[slots]
    breakdown = qber_components(errors, dark_any, wrong_any, leak_any)
    return SiftedKeyStats.from_breakdown(breakdown, clock_hz, n_slots, conflicts)


def eve_info(theta_deg: float) -> float:
    """Eavesdropper information per conclusive bit for state separation theta.

    The optimal individual attack on two states ``theta`` degrees apart gains
    ``1 - cos(theta)`` bits per conclusive bit.  Valid for theta in [0, 90].
    """
    if not (0.0 <= theta_deg <= 90.0):
        raise ValueError(f"state separation must be in [0, 90] deg, got {theta_deg}")
    return 1.0 - math.cos(math.radians(theta_deg))


def net_rate_factor(qber: float, i_ae: float) -> float:
    """Distillation factor applied to the sifted rate (may be negative).

    Combines error-correction leakage (7/2 bits per error plus the binary
    entropy terms) with privacy amplification proportional to the
    eavesdropper information ``i_ae``.  ``q log2 q`` terms take their limit 0
    at q = 0.
    """
    if not (0.0 <= qber < 1.0):
        raise ValueError(f"qber must be in [0, 1), got {qber}")
    if i_ae < 0:
        raise ValueError(f"i_ae must be >= 0, got {i_ae}")
    qlq = qber * math.log2(qber) if qber > 0.0 else 0.0
    comp = (1.0 - qber) * math.log2(1.0 - qber) if qber > 0.0 else 0.0
    return 1.0 + qlq - 3.5 * qber - i_ae * (1.0 - comp - 3.5 * qber)


def net_rate(stats: SiftedKeyStats, i_ae: float) -> RateReport:
    """Net key rate after error correction and privacy amplification.

    The factor is clamped at zero: past the zero-rate QBER no key survives.
    An empty sifted key yields a zero rate.
    """
    if stats.empty:
        return RateReport(0.0, math.nan, i_ae, math.nan, 0.0)
    factor = net_rate_factor(stats.qber, i_ae)
    return RateReport(stats.sifted_rate_bps, stats.qber, i_ae, factor,
                      max(0.0, factor) * stats.sifted_rate_bps)


def zero_rate_qber(i_ae: float, tol: float = 1e-9) -> float:
    """QBER at which the distillation factor crosses zero, by bisection.

    The factor is strictly decreasing in QBER over the operating range, so
    the root is unique; it shrinks as the eavesdropper information grows.
    """
    lo, hi = 1e-12, 0.5
    if net_rate_factor(hi, i_ae) > 0:
        raise ValueError(f"no zero-rate crossing below QBER=0.5 for i_ae={i_ae}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if net_rate_factor(mid, i_ae) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sifted_rate_pdl(alpha_prime_deg: float, intensity0: float, intensity1: float) -> float:
    """Sifted-rate factor ``sin^2(alpha') * (I0 + I1) / 2`` of a PDL-distorted pair.

    Proportional to the conclusive-bit rate when the states arrive separated
    by ``alpha_prime`` with the given intensity transmissions; ratios of two
    factors compare configurations.  A lossless 45-deg pair scores 1/2.
    """
    c = math.cos(math.radians(alpha_prime_deg))
    return 0.5 * (1.0 - c * c) * (intensity0 + intensity1)


def qber_extrapolate(cal: LinkCalibration, rate_bps: float) -> float:
    """QBER predicted at a different sifted rate from a calibrated link.

    The misalignment floor ``kappa`` is rate independent while dark noise
    splits evenly between the two bit values, contributing ``D / (2 B)``.
    """
    if not (rate_bps > 0):
        raise ValueError(f"rate_bps must be > 0, got {rate_bps}")
    return cal.kappa + cal.dark_noise_cps / (2.0 * rate_bps)
