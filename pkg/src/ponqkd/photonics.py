"""Photon-level device models: pulsed faint source, gated SPAD-style detector.

Pulses are Poissonian in photon number.  Timing jitter (source and detector)
is Gaussian and parameterized by FWHM; dark counts form a homogeneous Poisson
process over the run, carry a uniformly random polarization and no origin
slot.  The temporal filter assigns every detection to its nearest clock-slot
center and keeps it only if it falls within the acceptance window, which is
how jitter converts into both discarded counts and wrong-slot (erroneous)
assignments.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FWHM_TO_SIGMA",
    "SourceModel",
    "DetectorModel",
    "PhotonBatch",
    "DetectionBatch",
    "QberBreakdown",
    "emit_pulse",
    "emit_pulses",
    "detect",
    "temporal_filter",
    "qber_components",
]

# Gaussian FWHM = 2*sqrt(2*ln 2) * sigma.
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class SourceModel:
    """Pulsed polarization-encoding source.

    ``mu`` is the mean photon number per pulse at the launch reference point.
    ``polarization_leak`` is the probability a photon leaves in the state
    orthogonal to the intended one (finite extinction of the encoder).
    ``launch_efficiency`` absorbs scalar launch loss, e.g. imperfect coupling
    of the fundamental fiber mode.  Bit 1 is encoded at ``angle_bit1_deg``,
    bit 0 at ``angle_bit0_deg``; the defaults are 45 deg apart.
    """

    clock_hz: float
    mu: float
    jitter_fwhm_s: float = 60e-12
    polarization_leak: float = 0.0
    launch_efficiency: float = 0.99
    angle_bit1_deg: float = -22.5
    angle_bit0_deg: float = 22.5

    def __post_init__(self):
        if not (self.clock_hz > 0):
            raise ValueError(f"clock_hz must be > 0, got {self.clock_hz}")
        if not (self.mu > 0):
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if self.jitter_fwhm_s < 0:
            raise ValueError(f"jitter_fwhm_s must be >= 0, got {self.jitter_fwhm_s}")
        if not (0.0 <= self.polarization_leak <= 1.0):
            raise ValueError(f"polarization_leak must be in [0, 1], got {self.polarization_leak}")
        if not (0.0 < self.launch_efficiency <= 1.0):
            raise ValueError(f"launch_efficiency must be in (0, 1], got {self.launch_efficiency}")

    @property
    def separation_deg(self) -> float:
        d = abs(self.angle_bit1_deg - self.angle_bit0_deg) % 180.0
        return min(d, 180.0 - d)


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon detector with efficiency, darks, jitter and dead time.

    ``window_s`` is the temporal acceptance window centred on each slot;
    ``None`` selects the default of half a clock period at run time.
    ``dark_rate_cps`` is the total dark-count rate of the receiver.
    """

    efficiency: float = 0.12
    dark_rate_cps: float = 0.0
    jitter_fwhm_s: float = 350e-12
    window_s: float | None = None
    dead_time_s: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.efficiency <= 1.0):
            raise ValueError(f"efficiency must be in [0, 1], got {self.efficiency}")
        if self.dark_rate_cps < 0:
            raise ValueError(f"dark_rate_cps must be >= 0, got {self.dark_rate_cps}")
        if self.jitter_fwhm_s < 0:
            raise ValueError(f"jitter_fwhm_s must be >= 0, got {self.jitter_fwhm_s}")
        if self.window_s is not None and not (self.window_s > 0):
            raise ValueError(f"window_s must be > 0, got {self.window_s}")
        if self.dead_time_s < 0:
            raise ValueError(f"dead_time_s must be >= 0, got {self.dead_time_s}")


@dataclass
class PhotonBatch:
    """Struct-of-arrays photon stream (one entry per photon)."""

    origin_slot: np.ndarray   # emission slot index
    time_s: np.ndarray        # absolute time
    angle_deg: np.ndarray     # polarization angle
    leaked: np.ndarray        # True if emitted orthogonal to the intended state

    @property
    def size(self) -> int:
        return self.time_s.size


@dataclass
class DetectionBatch:
    """Registered detector events; darks have origin_slot == -1."""

    origin_slot: np.ndarray
    time_s: np.ndarray
    angle_deg: np.ndarray
    leaked: np.ndarray
    is_dark: np.ndarray

    @property
    def size(self) -> int:
        return self.time_s.size


def emit_pulses(bits, source: SourceModel, rng, mu_override: float | None = None) -> PhotonBatch:
    """Emit the photon stream for a full slot sequence.

    Photon counts per slot are Poisson with mean ``mu * launch_efficiency``
    (``mu_override`` substitutes the per-arm mean when the network references
    it elsewhere).  Each photon gets the slot's bit angle, flipped to the
    orthogonal direction with probability ``polarization_leak``, and a launch
    time jittered around the slot center.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    mu = source.mu if mu_override is None else mu_override
    counts = rng.poisson(mu * source.launch_efficiency, bits.size)
    origin = np.repeat(np.arange(bits.size, dtype=np.int64), counts)
    n = origin.size
    period = 1.0 / source.clock_hz
    times = origin * period
    if source.jitter_fwhm_s > 0 and n:
        times = times + rng.normal(0.0, source.jitter_fwhm_s * FWHM_TO_SIGMA, n)
    angles = np.where(bits[origin] == 1, source.angle_bit1_deg, source.angle_bit0_deg)
    leaked = np.zeros(n, dtype=bool)
    if source.polarization_leak > 0 and n:
        leaked = rng.random(n) < source.polarization_leak
        angles = np.where(leaked, angles + 90.0, angles)
    return PhotonBatch(origin, times.astype(float), angles % 360.0, leaked)


def emit_pulse(bit: int, slot: int, source: SourceModel, rng) -> PhotonBatch:
    """Single-slot convenience wrapper around ``emit_pulses``."""
    batch = emit_pulses([bit], source, rng)
    batch.origin_slot = batch.origin_slot + slot
    batch.time_s = batch.time_s + slot / source.clock_hz
    return batch


def detect(arrivals: PhotonBatch, detector: DetectorModel, duration_s: float, rng) -> DetectionBatch:
    """Register arriving photons and add dark counts.

    Each arrival independently registers with the detector efficiency and is
    smeared by the detector's own jitter.  Dark events are uniform over
    ``[0, duration_s)`` with uniformly random polarization: downstream they
    sift with the protocol's conclusive probability and err half the time.
    With a positive dead time, events closer than ``dead_time_s`` after an
    accepted event are dropped in time order.
    """
    if duration_s < 0:
        raise ValueError(f"duration_s must be >= 0, got {duration_s}")
    keep = rng.random(arrivals.size) < detector.efficiency
    origin = arrivals.origin_slot[keep]
    times = arrivals.time_s[keep]
    angles = arrivals.angle_deg[keep]
    leaked = arrivals.leaked[keep]
    if detector.jitter_fwhm_s > 0 and times.size:
        times = times + rng.normal(0.0, detector.jitter_fwhm_s * FWHM_TO_SIGMA, times.size)

    n_dark = rng.poisson(detector.dark_rate_cps * duration_s)
    if n_dark:
        dark_times = rng.uniform(0.0, duration_s, n_dark)
        dark_angles = rng.uniform(0.0, 360.0, n_dark)
        origin = np.concatenate([origin, np.full(n_dark, -1, dtype=np.int64)])
        times = np.concatenate([times, dark_times])
        angles = np.concatenate([angles, dark_angles])
        leaked = np.concatenate([leaked, np.zeros(n_dark, dtype=bool)])
    is_dark = origin < 0

    if detector.dead_time_s > 0 and times.size:
        order = np.argsort(times, kind="stable")
        keep_idx = []
        last = -math.inf
        for i in order:
            if times[i] - last >= detector.dead_time_s:
                keep_idx.append(i)
                last = times[i]
        sel = np.array(keep_idx, dtype=np.int64)
        origin, times, angles = origin[sel], times[sel], angles[sel]
        leaked, is_dark = leaked[sel], is_dark[sel]

    return DetectionBatch(origin, times, angles, leaked, is_dark)


def temporal_filter(events: DetectionBatch, clock_hz: float, window_s: float,
                    n_slots: int | None = None):
    """Assign events to clock slots and apply the acceptance window.

    Every event maps to its nearest slot center (ties go to the lower slot)
    and is kept only if it lies within ``window_s / 2`` of that center,
    inclusive.  Events assigned outside ``[0, n_slots)`` are discarded.
    Returns ``(kept_events, assigned_slots, n_discarded)``.
    """
    if not (clock_hz > 0):
        raise ValueError(f"clock_hz must be > 0, got {clock_hz}")
    if not (0 < window_s <= 1.0 / clock_hz):
        raise ValueError(
            f"window_s must be in (0, one clock period = {1.0 / clock_hz:.3e} s], got {window_s}")
    phase = events.time_s * clock_hz
    lower = np.floor(phase)
    frac = phase - lower
    slot = np.where(frac > 0.5, lower + 1.0, lower).astype(np.int64)
    offset = np.abs(events.time_s - slot / clock_hz)
    keep = offset <= window_s / 2.0
    if n_slots is not None:
        keep &= (slot >= 0) & (slot < n_slots)
    n_discarded = int(events.size - keep.sum())
    kept = DetectionBatch(events.origin_slot[keep], events.time_s[keep],
                          events.angle_deg[keep], events.leaked[keep],
                          events.is_dark[keep])
    return kept, slot[keep], n_discarded


@dataclass(frozen=True)
class QberBreakdown:
    """Sifted-error decomposition by physical cause.

    Error counts are mutually exclusive (each erroneous bit gets exactly one
    cause, resolved in the priority order dark > wrong slot > leak), so the
    three counts sum to the total error count exactly.  The total QBER is
    defined as the sum of the three cause fractions, which keeps the error
    budget bitwise-exact in floating point as well; it differs from
    ``error_count / sifted_count`` by at most a couple of ulp.
    """

    sifted_count: int
    error_count: int
    leak_errors: int
    dark_errors: int
    jitter_errors: int

    @property
    def qber(self) -> float:
        return self.leak_fraction + self.dark_fraction + self.jitter_fraction

    @property
    def leak_fraction(self) -> float:
        return self.leak_errors / self.sifted_count

    @property
    def dark_fraction(self) -> float:
        return self.dark_errors / self.sifted_count

    @property
    def jitter_fraction(self) -> float:
        return self.jitter_errors / self.sifted_count


def qber_components(sifted_error, had_dark, had_wrong_slot, had_leak) -> QberBreakdown:
    """Decompose sifted errors into dark, wrong-slot and leak contributions.

    Arguments are parallel boolean arrays over the sifted bits: whether the
    bit is an error, and whether the conclusive evidence behind it involved a
    dark count, a wrong-slot photon or a polarization-leaked photon.  A bit
    conclusively measured from an unflipped, correctly slotted photon can
    never be wrong, so the three causes cover all errors.
    """
    sifted_error = np.asarray(sifted_error, dtype=bool)
    if sifted_error.size == 0:
        raise ValueError("empty sifted key: no bits to decompose")
    had_dark = np.asarray(had_dark, dtype=bool)
    had_wrong_slot = np.asarray(had_wrong_slot, dtype=bool)
    had_leak = np.asarray(had_leak, dtype=bool)
    dark = sifted_error & had_dark
    jitter = sifted_error & ~had_dark & had_wrong_slot
    leak = sifted_error & ~had_dark & ~had_wrong_slot & had_leak
    n_err = int(sifted_error.sum())
    n_dark, n_jit, n_leak = int(dark.sum()), int(jitter.sum()), int(leak.sum())
    unexplained = n_err - n_dark - n_jit - n_leak
    if unexplained:
        raise AssertionError(
            f"{unexplained} sifted errors have no cause flag; error attribution is broken")
    return QberBreakdown(int(sifted_error.size), n_err, n_leak, n_dark, n_jit)
