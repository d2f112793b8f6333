"""Two-decoy-state bounds and asymptotic secure-key-rate estimation for MDI-QKD.

All functions here are pure: they map measured (or simulated) gain/QBER
tables to single-photon yield and error bounds, and from those to the
asymptotic secure key rate.  Tables are 3x3 matrices indexed by intensity,
rows = Alice's intensity, columns = Bob's intensity, in the fixed order
(signal mu, decoy nu, vacuum omega).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

INTENSITY_LABELS = ("mu", "nu", "omega")

# Index aliases for the 3x3 tables.
MU, NU, OM = 0, 1, 2


class DegenerateBoundsError(ValueError):
    """The decoy bounds are degenerate (no single-photon key material)."""


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class IntensitySet:
    """Per-party mean photon numbers of the signal/decoy/vacuum states.

    The strict ordering mu > nu > omega >= 0 is required within each party;
    the bound denominators vanish otherwise.
    """

    mu_a: float
    nu_a: float
    omega_a: float
    mu_b: float
    nu_b: float
    omega_b: float

    def __post_init__(self) -> None:
        for side in ("a", "b"):
            mu = _require_finite(f"mu_{side}", getattr(self, f"mu_{side}"))
            nu = _require_finite(f"nu_{side}", getattr(self, f"nu_{side}"))
            om = _require_finite(f"omega_{side}", getattr(self, f"omega_{side}"))
            if not (mu > nu > om >= 0.0):
                raise ValueError(
                    f"intensities of party {side} must satisfy mu > nu > omega >= 0, "
                    f"got ({mu}, {nu}, {om})"
                )

    @classmethod
    def symmetric(cls, mu: float, nu: float, omega: float) -> "IntensitySet":
        """Same three intensities for Alice and Bob."""
        return cls(mu, nu, omega, mu, nu, omega)

    def alice(self) -> tuple[float, float, float]:
        return (self.mu_a, self.nu_a, self.omega_a)

    def bob(self) -> tuple[float, float, float]:
        return (self.mu_b, self.nu_b, self.omega_b)


@dataclass
class MeasuredTables:
    """Gain and QBER matrices for one basis.

    gain[i][j] is the probability of a successful Bell-state-measurement
    coincidence per emitted pulse pair with Alice sending intensity i and
    Bob intensity j (i, j in mu/nu/omega order).  qber[i][j] is the error
    fraction among those coincidences.  qber_std optionally carries
    one-standard-deviation uncertainties.
    """

    basis: str
    gain: np.ndarray
    qber: np.ndarray
    qber_std: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.basis not in ("Z", "X"):
            raise ValueError(f"basis must be 'Z' or 'X', got {self.basis!r}")
        self.gain = np.asarray(self.gain, dtype=float)
        self.qber = np.asarray(self.qber, dtype=float)
        if self.gain.shape != (3, 3) or self.qber.shape != (3, 3):
            raise ValueError("gain and qber must be 3x3 matrices")
        if np.any(~np.isfinite(self.gain)) or np.any((self.gain < 0) | (self.gain > 1)):
            raise ValueError(f"{self.basis}-basis gains must lie in [0, 1]")
        # A QBER entry may be NaN when the corresponding gain is zero
        # (no coincidences to estimate it from).
        defined = np.isfinite(self.qber)
        if np.any((self.qber[defined] < 0) | (self.qber[defined] > 1)):
            raise ValueError(f"{self.basis}-basis QBERs must lie in [0, 1]")
        if np.any(~defined & (self.gain > 0)):
            raise ValueError("QBER undefined for a pair with nonzero gain")
        if self.qber_std is not None:
            self.qber_std = np.asarray(self.qber_std, dtype=float)
            if self.qber_std.shape != (3, 3):
                raise ValueError("qber_std must be a 3x3 matrix")


@dataclass(frozen=True)
class DecoyBounds:
    """Outputs of the two-decoy analytical estimation.

    The *_raw fields keep the pre-clamp values for diagnostics; the main
    fields are clamped to physical range (yields to [0, 1], the
    single-photon error bound to [0, 0.5]).
    """

    qm1_z: float
    qm2_z: float
    qm1_x: float
    qm2_x: float
    y11_z_lower: float
    y11_x_lower: float
    e11_x_upper: float
    y11_z_raw: float
    y11_x_raw: float
    e11_x_raw: float


@dataclass
class KeyRateInput:
    """Everything the asymptotic key-rate formula consumes."""

    intensities: IntensitySet
    tables_z: MeasuredTables
    tables_x: MeasuredTables
    q: float
    f: float
    n_pulses: Optional[float] = None

    def __post_init__(self) -> None:
        if not (0.0 < self.q <= 1.0):
            raise ValueError(f"q must lie in (0, 1], got {self.q}")
        if self.f < 1.0:
            raise ValueError(f"error-correction efficiency f must be >= 1, got {self.f}")
        if self.tables_z.basis != "Z" or self.tables_x.basis != "X":
            raise ValueError("tables_z/tables_x bases are swapped or mislabelled")
        if self.n_pulses is not None and self.n_pulses < 0:
            raise ValueError("n_pulses must be non-negative")


@dataclass
class KeyRateResult:
    """Final rate plus every intermediate of the rate formula, for audit."""

    rate_per_pulse: float
    rate_raw: float
    q11_z_lower: float
    entropy_e11: float
    entropy_qber: float
    bounds: DecoyBounds
    total_key_bits: Optional[float] = None


def binary_entropy(p: float) -> float:
    """Binary Shannon entropy H(p) in bits, with 0*log2(0) := 0."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"binary_entropy requires p in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def qm_pair(tables: MeasuredTables, intensities: IntensitySet) -> tuple[float, float]:
    """Combined gain quantities of the two-decoy method.

    The first combines the decoy/vacuum gains, the second the signal/vacuum
    gains; both weight each gain by exp(intensity_a + intensity_b).  Negative
    results are passed through (clamping is the caller's business).
    """
    q = tables.gain
    _, nu_a, om_a = intensities.alice()
    _, nu_b, om_b = intensities.bob()
    mu_a = intensities.mu_a
    mu_b = intensities.mu_b
    qm1 = (
        q[NU, NU] * math.exp(nu_a + nu_b)
        + q[OM, OM] * math.exp(om_a + om_b)
        - q[NU, OM] * math.exp(nu_a + om_b)
        - q[OM, NU] * math.exp(om_a + nu_b)
    )
    qm2 = (
        q[MU, MU] * math.exp(mu_a + mu_b)
        + q[OM, OM] * math.exp(om_a + om_b)
        - q[MU, OM] * math.exp(mu_a + om_b)
        - q[OM, MU] * math.exp(om_a + mu_b)
    )
    return qm1, qm2


def _y11_raw(qm1: float, qm2: float, intensities: IntensitySet) -> float:
    mu_a, nu_a, om_a = intensities.alice()
    mu_b, nu_b, om_b = intensities.bob()
    num = (mu_a**2 - om_a**2) * (mu_b - om_b) * qm1 - (nu_a**2 - om_a**2) * (
        nu_b - om_b
    ) * qm2
    den = (
        (mu_a - om_a)
        * (mu_b - om_b)
        * (nu_a - om_a)
        * (nu_b - om_b)
        * (mu_a - nu_a)
    )
    if den <= 0.0:
        raise DegenerateBoundsError(
            "degenerate intensity set: the yield-bound denominator vanishes"
        )
    return num / den


def y11_lower(qm1: float, qm2: float, intensities: IntensitySet) -> float:
    """Lower bound on the single-photon-pair yield, clamped to [0, 1]."""
    return min(1.0, max(0.0, _y11_raw(qm1, qm2, intensities)))


def _e11_raw(
    tables_x: MeasuredTables, intensities: IntensitySet, y11_x_lower: float
) -> float:
    if y11_x_lower <= 0.0:
        raise DegenerateBoundsError(
            "single-photon error bound undefined: X-basis yield lower bound is zero"
        )
    _, nu_a, om_a = intensities.alice()
    _, nu_b, om_b = intensities.bob()
    q, e = tables_x.gain, tables_x.qber
    qe = np.where(q > 0.0, q * np.nan_to_num(e), 0.0)
    num = (
        qe[NU, NU] * math.exp(nu_a + nu_b)
        + qe[OM, OM] * math.exp(om_a + om_b)
        - qe[NU, OM] * math.exp(nu_a + om_b)
        - qe[OM, NU] * math.exp(om_a + nu_b)
    )
    return num / ((nu_a - om_a) * (nu_b - om_b) * y11_x_lower)


def e11_upper(
    tables_x: MeasuredTables, intensities: IntensitySet, y11_x_lower: float
) -> float:
    """Upper bound on the single-photon X-basis error rate, clamped to [0, 0.5]."""
    return min(0.5, max(0.0, _e11_raw(tables_x, intensities, y11_x_lower)))


def single_photon_gain(mu_a: float, y11: float, mu_b: Optional[float] = None) -> float:
    """Gain of the (1, 1)-photon component at the signal intensities.

    Poisson weight of both parties emitting exactly one photon, times the
    single-photon-pair yield.  With symmetric intensities this is
    mu^2 * exp(-2 mu) * y11.
    """
    if mu_b is None:
        mu_b = mu_a
    if mu_a <= 0.0 or mu_b <= 0.0:
        raise ValueError("signal intensities must be positive")
    if not (0.0 <= y11 <= 1.0):
        raise ValueError(f"y11 must lie in [0, 1], got {y11}")
    return mu_a * mu_b * math.exp(-(mu_a + mu_b)) * y11


def key_rate(inp: KeyRateInput, bounds: DecoyBounds) -> KeyRateResult:
    """Asymptotic secure key rate in bits per emitted pulse pair.

    rate_raw = q * { Q11_Z_L * [1 - H(e11)] - Q_mumu_Z * f * H(E_mumu_Z) };
    the reported rate is clamped at zero.
    """
    q_mumu = float(inp.tables_z.gain[MU, MU])
    e_mumu = float(inp.tables_z.qber[MU, MU])
    if not math.isfinite(e_mumu):
        raise DegenerateBoundsError("Z-basis signal-signal QBER is undefined")
    q11 = single_photon_gain(inp.intensities.mu_a, bounds.y11_z_lower, inp.intensities.mu_b)
    h_e11 = binary_entropy(bounds.e11_x_upper)
    h_qber = binary_entropy(e_mumu)
    rate_raw = inp.q * (q11 * (1.0 - h_e11) - q_mumu * inp.f * h_qber)
    rate = max(rate_raw, 0.0)
    total = rate * inp.n_pulses if inp.n_pulses is not None else None
    return KeyRateResult(
        rate_per_pulse=rate,
        rate_raw=rate_raw,
        q11_z_lower=q11,
        entropy_e11=h_e11,
        entropy_qber=h_qber,
        bounds=bounds,
        total_key_bits=total,
    )


def estimate_bounds(
    tables_z: MeasuredTables,
    tables_x: MeasuredTables,
    intensities: IntensitySet,
    e11_override: Optional[float] = None,
) -> DecoyBounds:
    """Run the full two-decoy estimation on both bases.

    e11_override substitutes an externally known single-photon error bound
    for the one derived from the X tables (useful when the X tables are too
    coarse to support the division).
    """
    try:
        qm1_z, qm2_z = qm_pair(tables_z, intensities)
        qm1_x, qm2_x = qm_pair(tables_x, intensities)
    except ValueError as exc:
        raise type(exc)(f"combined-gain stage: {exc}") from exc
    try:
        y11_z_raw = _y11_raw(qm1_z, qm2_z, intensities)
        y11_x_raw = _y11_raw(qm1_x, qm2_x, intensities)
    except DegenerateBoundsError as exc:
        raise DegenerateBoundsError(f"yield-bound stage: {exc}") from exc
    y11_z = min(1.0, max(0.0, y11_z_raw))
    y11_x = min(1.0, max(0.0, y11_x_raw))
    if e11_override is not None:
        if not (0.0 <= e11_override <= 0.5):
            raise ValueError(f"e11 override must lie in [0, 0.5], got {e11_override}")
        e11_raw = e11 = float(e11_override)
    else:
        try:
            e11_raw = _e11_raw(tables_x, intensities, y11_x)
        except DegenerateBoundsError as exc:
            raise DegenerateBoundsError(f"error-bound stage: {exc}") from exc
        e11 = min(0.5, max(0.0, e11_raw))
    return DecoyBounds(
        qm1_z=qm1_z,
        qm2_z=qm2_z,
        qm1_x=qm1_x,
        qm2_x=qm2_x,
        y11_z_lower=y11_z,
        y11_x_lower=y11_x,
        e11_x_upper=e11,
        y11_z_raw=y11_z_raw,
        y11_x_raw=y11_x_raw,
        e11_x_raw=e11_raw,
    )


def estimate_all(
    inp: KeyRateInput, e11_override: Optional[float] = None
) -> KeyRateResult:
    """Bounds on both bases followed by the key-rate formula, in one call."""
    bounds = estimate_bounds(inp.tables_z, inp.tables_x, inp.intensities, e11_override)
    try:
        return key_rate(inp, bounds)
    except DegenerateBoundsError as exc:
        raise DegenerateBoundsError(f"key-rate stage: {exc}") from exc


def bootstrap_bound_sigmas(
    tables_z: MeasuredTables,
    tables_x: MeasuredTables,
    intensities: IntensitySet,
    trials_per_pair: int,
    n_boot: int = 300,
    seed: int = 0,
) -> dict[str, float]:
    """Statistical uncertainties of the decoy bounds by parametric bootstrap.

    Treats each gain as a binomial fraction over trials_per_pair emitted
    pairs and each QBER as a binomial fraction over the accepted count,
    resamples, and reports one standard deviation of each bound.  Bootstrap
    replicates with a degenerate X-basis yield are dropped from the
    e11 statistic.
    """
    if trials_per_pair < 1:
        raise ValueError("trials_per_pair must be positive")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xB007)))
    y11_z_samples = []
    y11_x_samples = []
    e11_samples = []
    for _ in range(n_boot):
        resampled = {}
        for tab in (tables_z, tables_x):
            acc = rng.binomial(trials_per_pair, tab.gain)
            gain = acc / trials_per_pair
            qber = np.nan_to_num(tab.qber)
            err = rng.binomial(acc, qber)
            with np.errstate(invalid="ignore"):
                qber_rs = np.where(acc > 0, err / np.maximum(acc, 1), np.nan)
            resampled[tab.basis] = MeasuredTables(tab.basis, gain, qber_rs)
        qm1_z, qm2_z = qm_pair(resampled["Z"], intensities)
        qm1_x, qm2_x = qm_pair(resampled["X"], intensities)
        y11_z_samples.append(y11_lower(qm1_z, qm2_z, intensities))
        y11_x = y11_lower(qm1_x, qm2_x, intensities)
        y11_x_samples.append(y11_x)
        if y11_x > 0.0:
            e11_samples.append(e11_upper(resampled["X"], intensities, y11_x))
    return {
        "y11_z_lower": float(np.std(y11_z_samples)),
        "y11_x_lower": float(np.std(y11_x_samples)),
        "e11_x_upper": float(np.std(e11_samples)) if e11_samples else float("inf"),
    }
