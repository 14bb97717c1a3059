"""Linear-polarization states and their transformation by polarization-dependent loss.

All angles are degrees throughout; radians appear only inside trig calls.
A polarization angle is physically equivalent to itself plus 180 deg, but that
equivalence is applied only when *comparing* two states (``relative_angle``,
``pdl_separation``): transformation functions preserve the caller's frame.

A PDL element is modelled by the orientation of its high-loss axis, its PDL
value in dB (ratio of maximum to minimum intensity transmission) and an
optional polarization-independent excess loss.  In the element's own frame the
field component parallel to the high-loss axis is attenuated in amplitude by
10^(-PDL/20), which both rotates the polarization away from that axis and
attenuates the intensity.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PolarizationState",
    "PdlElement",
    "relative_angle",
    "relative_angle_deg",
    "pdl_rotate_angle",
    "pdl_separation",
    "pdl_intensity_factor",
    "pdl_intensity_pair",
    "pdl_attenuate",
]


@dataclass(frozen=True)
class PolarizationState:
    """A linear polarization state: angle in degrees plus a relative intensity.

    Instances are immutable; transformations return new states.
    """

    angle_deg: float
    intensity: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.angle_deg):
            raise ValueError(f"polarization angle must be finite, got {self.angle_deg}")
        if not (self.intensity >= 0.0):
            raise ValueError(f"intensity must be >= 0, got {self.intensity}")
        object.__setattr__(self, "angle_deg", float(self.angle_deg) % 360.0)


@dataclass(frozen=True)
class PdlElement:
    """A lumped polarization-dependent loss element.

    pdl_db is the dB ratio between the low-loss and high-loss axis
    transmissions; axis_deg orients the high-loss axis in the global frame;
    excess_loss_db is scalar (polarization independent) loss applied on top.
    """

    pdl_db: float
    axis_deg: float = 0.0
    excess_loss_db: float = 0.0

    def __post_init__(self):
        if self.pdl_db < 0:
            raise ValueError(f"pdl_db must be >= 0, got {self.pdl_db}")
        if self.excess_loss_db < 0:
            raise ValueError(f"excess_loss_db must be >= 0, got {self.excess_loss_db}")


def relative_angle_deg(angle_a_deg, angle_b_deg):
    """Relative angle between two polarization directions, folded into [0, 90].

    Accepts scalars or arrays.  Uses the 180-deg equivalence of linear
    polarization, so e.g. 350 deg and 35 deg are 45 deg apart.
    """
    d = np.abs(np.asarray(angle_a_deg, dtype=float) - np.asarray(angle_b_deg, dtype=float)) % 180.0
    out = np.minimum(d, 180.0 - d)
    return float(out) if np.ndim(out) == 0 else out


def relative_angle(state_a: PolarizationState, state_b: PolarizationState) -> float:
    """Relative angle between two states, folded into [0, 90] degrees."""
    return relative_angle_deg(state_a.angle_deg, state_b.angle_deg)


def pdl_rotate_angle(angle_deg, pdl_db):
    """Rotate a polarization angle measured from the high-loss axis of a PDL element.

    The amplitude along the high-loss axis shrinks by 10^(-|PDL|/20), so the
    tangent of the angle grows by 10^(+|PDL|/20).  The arctangent is remapped
    so each quadrant maps onto itself: angles in [90, 270) gain 180 deg, angles
    in [270, 360) gain 360 deg.  90 and 270 deg are fixed points (the state is
    fully along the low-loss axis) and are returned unchanged.

    Accepts scalars or arrays; returns angles normalized to [0, 360).
    """
    a = np.asarray(angle_deg, dtype=float) % 360.0
    scale = 10.0 ** (abs(float(pdl_db)) / 20.0)
    fixed = (a == 90.0) | (a == 270.0)
    base = np.degrees(np.arctan(np.tan(np.radians(a)) * scale))
    out = np.where(a < 90.0, base, np.where(a < 270.0, base + 180.0, base + 360.0))
    out = np.where(fixed, a, out) % 360.0
    return float(out) if np.ndim(out) == 0 else out


def pdl_separation(angle_a_deg: float, angle_b_deg: float, pdl_db: float) -> float:
    """Angular separation of two states after traversing a PDL element.

    Both input angles are measured from the element's high-loss axis.  Returns
    the separation of the rotated pair folded into [0, 90] degrees.
    """
    ap = pdl_rotate_angle(angle_a_deg, pdl_db)
    bp = pdl_rotate_angle(angle_b_deg, pdl_db)
    return relative_angle_deg(ap, bp)


def pdl_intensity_factor(angle_deg, pdl_db):
    """Intensity transmission of a PDL element for a state at ``angle_deg``.

    Angle measured from the high-loss axis.  Equals t2*cos^2 + sin^2 with
    t2 = 10^(-PDL/10): the high-loss component is attenuated, the orthogonal
    one passes.  Identical to (cos^2(angle)/cos^2(rotated)) * 10^(-PDL/10).
    Excess (scalar) loss is not included here.  Accepts scalars or arrays.
    """
    t2 = 10.0 ** (-abs(float(pdl_db)) / 10.0)
    r = np.radians(np.asarray(angle_deg, dtype=float))
    out = t2 * np.cos(r) ** 2 + np.sin(r) ** 2
    return float(out) if np.ndim(out) == 0 else out


def pdl_intensity_pair(angle_a_deg, angle_b_deg, pdl_db, formula="corrected"):
    """Intensity transmissions (for the states at angles a and b) through a PDL element.

    ``formula="corrected"`` evaluates each state's own transmission,
    t2*cos^2(angle) + sin^2(angle) — the physically consistent form, bounded
    by [10^(-PDL/10), 1].

    ``formula="verbatim"`` evaluates an alternative cross-ratio variant,
    (cos^2 b / cos^2 a) * 10^(-PDL/10) for the state at ``a`` swapped
    against the other state's angle.  It is retained only for comparison: it
    is unbounded near a, b = 90 or 270 deg and can exceed 1 (unphysical gain).
    """
    if formula == "corrected":
        return (pdl_intensity_factor(angle_a_deg, pdl_db),
                pdl_intensity_factor(angle_b_deg, pdl_db))
    if formula == "verbatim":
        t2 = 10.0 ** (-abs(float(pdl_db)) / 10.0)
        ca = np.cos(np.radians(np.asarray(angle_a_deg, dtype=float))) ** 2
        cb = np.cos(np.radians(np.asarray(angle_b_deg, dtype=float))) ** 2
        ia = (cb / ca) * t2
        ib = (ca / cb) * t2
        if np.ndim(ia) == 0:
            return float(ia), float(ib)
        return ia, ib
    raise ValueError(f"formula must be 'corrected' or 'verbatim', got {formula!r}")


def pdl_attenuate(state: PolarizationState, element: PdlElement) -> PolarizationState:
    """Pass a state through a PDL element; returns the transformed state.

    The state's angle is re-expressed in the element frame (relative to the
    high-loss axis), rotated by the tangent-scaling law, and mapped back.  The
    intensity picks up the polarization-dependent factor plus any scalar
    excess loss.  With pdl_db == 0 the angle and polarization-dependent factor
    are passed through untouched.
    """
    theta = (state.angle_deg - element.axis_deg) % 360.0
    excess = 10.0 ** (-element.excess_loss_db / 10.0)
    if element.pdl_db == 0.0:
        return PolarizationState(state.angle_deg, state.intensity * excess)
    factor = pdl_intensity_factor(theta, element.pdl_db)
    rotated = pdl_rotate_angle(theta, element.pdl_db)
    return PolarizationState(
        (rotated + element.axis_deg) % 360.0,
        state.intensity * factor * excess,
    )
