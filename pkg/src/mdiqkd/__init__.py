"""Decoy-state analysis, channel simulation and timing calibration for
plug-and-play MDI-QKD."""

from .decoy import (
    DecoyBounds,
    DegenerateBoundsError,
    IntensitySet,
    KeyRateInput,
    KeyRateResult,
    MeasuredTables,
    binary_entropy,
    bootstrap_bound_sigmas,
    e11_upper,
    estimate_all,
    estimate_bounds,
    key_rate,
    qm_pair,
    single_photon_gain,
    y11_lower,
)
from .channel import (
    ChannelParams,
    CoincidenceRecord,
    PulseState,
    TrueSinglePhotonStats,
    analytic_tables,
    mc_bsm_trial,
    mc_tables,
    photon_pair_yields,
)
from .timing import (
    CalibrationSummary,
    TimingParams,
    arrival_time_difference,
    calibrate,
    delay_compensation,
    overlap_check,
    thermal_length_change,
)

__version__ = "0.1.0"
