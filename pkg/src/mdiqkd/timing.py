"""Passive timing calibration for asymmetric plug-and-play channels.

The synchronization (1310 nm) and signal (1550 nm) wavelengths see
different group indices, so the round trips over the two unequal fibers
leave a constant arrival-time offset plus a tiny thermal drift.  The
offset is removed with a discrete delay chip; the functions here compute
the offset, the drift, the quantized delay setting and the residual
mismatch against the pulse width.

Group velocities enter as group indices (1/v = n_g / c).  The round-trip
factor cancels in the A-vs-B difference, so everything is expressed in
one-way length asymmetry.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

SPEED_OF_LIGHT_M_S = 299_792_458.0

# Typical SMF-28 group indices; the drift they imply is configuration, not
# a measured property of any specific fiber.
DEFAULT_GROUP_INDEX_1550 = 1.4682
DEFAULT_GROUP_INDEX_1310 = 1.4672
DEFAULT_ALPHA_T = 5.4e-7  # thermal expansion of fiber, per degree C


@dataclass(frozen=True)
class TimingParams:
    """Inputs of the timing-calibration calculation.

    Lengths in km, delay resolution in ps, pulse width (FWHM) in ns.
    """

    length_a0: float
    length_b0: float
    group_index_1550: float = DEFAULT_GROUP_INDEX_1550
    group_index_1310: float = DEFAULT_GROUP_INDEX_1310
    alpha_t: float = DEFAULT_ALPHA_T
    delta_t_celsius: float = 10.0
    delay_resolution: float = 10.0
    pulse_width: float = 2.0

    def __post_init__(self) -> None:
        if self.length_a0 < 0 or self.length_b0 < 0:
            raise ValueError("fiber lengths must be non-negative")
        if self.group_index_1550 <= 1.0 or self.group_index_1310 <= 1.0:
            raise ValueError("group indices must exceed 1")
        if self.delay_resolution <= 0:
            raise ValueError("delay resolution must be positive")
        if self.pulse_width <= 0:
            raise ValueError("pulse width must be positive")


def thermal_length_change(length0_km: float, alpha_t: float, delta_t: float) -> float:
    """Thermal fiber length change alpha_T * L0 * dT, in meters."""
    return alpha_t * length0_km * 1000.0 * delta_t


def arrival_time_difference(params: TimingParams) -> tuple[float, float]:
    """Constant offset (ns) and thermal drift (ps) of the arrival times.

    The offset is (n_1550 - n_1310)/c times the length asymmetry; the
    drift is the same dispersion factor applied to the thermal expansion
    of the asymmetry.  Reported separately because only the offset is
    compensated by the delay chip.
    """
    dn = params.group_index_1550 - params.group_index_1310
    asym_m = (params.length_b0 - params.length_a0) * 1000.0
    delta_t0_s = dn / SPEED_OF_LIGHT_M_S * asym_m
    dl_m = thermal_length_change(
        params.length_b0 - params.length_a0, params.alpha_t, params.delta_t_celsius
    )
    thermal_s = dn / SPEED_OF_LIGHT_M_S * dl_m
    return delta_t0_s * 1e9, thermal_s * 1e12


def delay_compensation(delta_t0_ns: float, resolution_ps: float) -> tuple[int, float]:
    """Delay-chip setting (integer steps) and residual mismatch (ps).

    Rounds half away from zero; the residual is bounded by half a step.
    """
    if resolution_ps <= 0:
        raise ValueError("delay resolution must be positive")
    delta_ps = delta_t0_ns * 1000.0
    steps = delta_ps / resolution_ps
    setting = int(math.copysign(math.floor(abs(steps) + 0.5), steps))
    residual = delta_ps - setting * resolution_ps
    return setting, residual


def overlap_check(
    residual_ps: float,
    thermal_ps: float,
    pulse_width_ns: float,
    threshold: float = 0.05,
) -> tuple[float, bool]:
    """Residual-plus-drift mismatch as a fraction of the pulse width.

    Passes when the fraction stays below the threshold, i.e. the pulses
    still overlap well enough for high-visibility interference.
    """
    if pulse_width_ns <= 0:
        raise ValueError("pulse width must be positive")
    ratio = (abs(residual_ps) + abs(thermal_ps)) / (pulse_width_ns * 1000.0)
    return ratio, ratio < threshold


@dataclass(frozen=True)
class CalibrationSummary:
    delta_t0_ns: float
    thermal_ps: float
    delay_setting: int
    residual_ps: float
    mismatch_ratio: float
    overlap_ok: bool


def calibrate(params: TimingParams, threshold: float = 0.05) -> CalibrationSummary:
    """Full calibration: offset, drift, delay setting and overlap verdict."""
    delta_t0, thermal = arrival_time_difference(params)
    setting, residual = delay_compensation(delta_t0, params.delay_resolution)
    ratio, ok = overlap_check(residual, thermal, params.pulse_width, threshold)
    return CalibrationSummary(delta_t0, thermal, setting, residual, ratio, ok)
