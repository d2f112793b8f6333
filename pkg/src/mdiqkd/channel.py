"""Channel and Bell-state-measurement model for time-bin MDI-QKD.

Generates gain/QBER tables from physical channel and detector parameters,
both as exact analytic expectations and as a seeded Monte Carlo that also
reports ground-truth single-photon statistics.

The physics kernel works at the photon-number level.  Each party's pulse
occupies a single optical mode spread over two time bins; after fiber loss
the modes interfere on a 50:50 beamsplitter feeding two threshold
detectors gated per time bin.  For n photons from Alice and m from Bob the
probability that a chosen set of detector-bin modes receives no photon has
the closed form

    P_empty(S | n, m) = sum_j C(n,j) C(m,j) a_S^(n-j) b_S^(m-j) |s_S|^(2j)

where a_S, b_S are the surviving-mode weights of each party's mode vector
and s_S their overlap restricted to the surviving modes.  The j > 0 terms
carry two-photon interference (they reproduce the Hong-Ou-Mandel dip
exactly), so the click statistics are exact for any photon numbers, and
Poisson mixing over (n, m) recovers phase-randomized weak-coherent-pulse
statistics.  Dark and background counts are folded in as independent
per-detector-per-gate click probabilities.

A successful Bell-state measurement is the post-selected singlet pattern:
the two detectors click at alternative time bins and nothing else clicks.
For that outcome the sifted bits must be anticorrelated in both bases, so
an accepted event is an error exactly when the two encoded bits agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .decoy import INTENSITY_LABELS, IntensitySet, MeasuredTables

# Detector-bin mode order: D1/bin0, D1/bin1, D2/bin0, D2/bin1.
_N_MODES = 4
_BIN_OF_MODE = (0, 1, 0, 1)
_BOB_SIGN = (1.0, 1.0, -1.0, -1.0)
# Singlet click patterns (bitmask over the mode order above):
# {D1/bin0, D2/bin1} and {D1/bin1, D2/bin0}.
_ACCEPT_PATTERNS = (0b1001, 0b0110)

POISSON_TAIL = 1e-12


@dataclass(frozen=True)
class ChannelParams:
    """Physical parameters of the two fiber channels and Charlie's detectors.

    Lengths are one-way Charlie-to-client distances in km (the decoy
    intensities are set at the clients, so only the return trip attenuates
    the signal).  misalignment is a single mode-mismatch fraction: it
    degrades X-basis interference visibility and leaks the same fraction of
    Z-basis pulse energy into the wrong time bin (finite modulator
    extinction).
    """

    length_a: float
    length_b: float
    attenuation: float = 0.2
    detector_efficiency: float = 0.1
    dark_count_prob: float = 6e-6
    background_prob: float = 0.0
    misalignment: float = 0.0

    def __post_init__(self) -> None:
        if self.length_a < 0 or self.length_b < 0:
            raise ValueError("fiber lengths must be non-negative")
        if self.attenuation < 0:
            raise ValueError("attenuation must be non-negative")
        if not (0.0 < self.detector_efficiency <= 1.0):
            raise ValueError("detector efficiency must lie in (0, 1]")
        for name in ("dark_count_prob", "background_prob", "misalignment"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1]")

    def transmittance_a(self) -> float:
        """Source-to-detector transmittance of Alice's pulses."""
        return 10.0 ** (-self.attenuation * self.length_a / 10.0) * self.detector_efficiency

    def transmittance_b(self) -> float:
        return 10.0 ** (-self.attenuation * self.length_b / 10.0) * self.detector_efficiency

    def noise_click_prob(self) -> float:
        """Dark plus background click probability per detector per gate."""
        return min(1.0, self.dark_count_prob + self.background_prob)


@dataclass(frozen=True)
class PulseState:
    """One encoded weak coherent pulse: basis, key bit and mean photon number."""

    basis: str
    bit: int
    intensity: float

    def __post_init__(self) -> None:
        if self.basis not in ("Z", "X"):
            raise ValueError(f"basis must be 'Z' or 'X', got {self.basis!r}")
        if self.bit not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {self.bit!r}")
        if self.intensity < 0:
            raise ValueError("intensity must be non-negative")


@dataclass(frozen=True)
class CoincidenceRecord:
    """Outcome of one simulated BSM trial."""

    clicks: tuple[bool, bool, bool, bool]  # D1/bin0, D1/bin1, D2/bin0, D2/bin1
    n_a: int
    n_b: int
    accepted: bool
    error: bool


@dataclass(frozen=True)
class TrueSinglePhotonStats:
    """Ground truth conditioned on both parties emitting exactly one photon.

    y11_true / e11_true are Monte Carlo estimates with one-standard-
    deviation radii; the _exact fields are the kernel's closed-form values.
    """

    y11_true: float
    e11_true: float
    y11_radius: float
    e11_radius: float
    y11_exact: float
    e11_exact: float
    conditioned_trials: int


def _encoding(basis: str, bit: int, leak: float) -> tuple[float, float]:
    """Amplitude of the pulse in (bin0, bin1), unit norm."""
    if basis == "Z":
        hi = math.sqrt(1.0 - leak)
        lo = math.sqrt(leak)
        return (hi, lo) if bit == 0 else (lo, hi)
    s = 1.0 / math.sqrt(2.0)
    return (s, s) if bit == 0 else (s, -s)


def _p_empty_grid(a: float, b: float, s2: float, n_max: int) -> np.ndarray:
    """P(no photon in the dropped modes | n, m) over an (n, m) grid."""
    out = np.zeros((n_max + 1, n_max + 1))
    for j in range(n_max + 1):
        va = np.array(
            [math.comb(n, j) * a ** (n - j) if n >= j else 0.0 for n in range(n_max + 1)]
        )
        vb = np.array(
            [math.comb(m, j) * b ** (m - j) if m >= j else 0.0 for m in range(n_max + 1)]
        )
        out += (s2**j) * np.outer(va, vb)
    return out


@lru_cache(maxsize=512)
def _pattern_table(
    eta_a: float,
    eta_b: float,
    mis: float,
    p_noise: float,
    basis_a: str,
    bit_a: int,
    basis_b: str,
    bit_b: int,
    n_max: int,
) -> np.ndarray:
    """Click-pattern distribution, shape (16, n_max + 1, n_max + 1).

    Entry [pattern, n, m] is the probability that exactly the detector-bin
    modes in `pattern` click (photons or noise) when Alice emits n photons
    and Bob m.
    """
    enc_a = _encoding(basis_a, bit_a, mis)
    enc_b = _encoding(basis_b, bit_b, mis)
    # Per-mode squared amplitudes and the Alice-Bob overlap contribution.
    # Alice couples only to the matched sub-mode of each detector-bin; Bob
    # splits between matched (1 - mis) and an orthogonal mismatched
    # sub-mode (mis), both of which fire the detector.
    ca2 = np.array([(eta_a / 2.0) * enc_a[_BIN_OF_MODE[k]] ** 2 for k in range(_N_MODES)])
    cb2 = np.array([(eta_b / 2.0) * enc_b[_BIN_OF_MODE[k]] ** 2 for k in range(_N_MODES)])
    # c_k * d_k on the matched sub-modes; the total over all modes is zero
    # (beamsplitter unitarity), so the kept-mode overlap is minus the sum
    # over the dropped modes.
    cd = np.array(
        [
            _BOB_SIGN[k]
            * math.sqrt(eta_a / 2.0)
            * enc_a[_BIN_OF_MODE[k]]
            * math.sqrt(eta_b * (1.0 - mis) / 2.0)
            * enc_b[_BIN_OF_MODE[k]]
            for k in range(_N_MODES)
        ]
    )
    empty = np.empty((16, n_max + 1, n_max + 1))
    for s_mask in range(16):
        drop = [k for k in range(_N_MODES) if s_mask >> k & 1]
        a_s = 1.0 - float(sum(ca2[k] for k in drop))
        b_s = 1.0 - float(sum(cb2[k] for k in drop))
        s_ov = -float(sum(cd[k] for k in drop))
        empty[s_mask] = _p_empty_grid(a_s, b_s, s_ov * s_ov, n_max)

    # Inclusion-exclusion: exact photon-click pattern probabilities.
    photon = np.zeros_like(empty)
    for t_mask in range(16):
        comp = ~t_mask & 0xF
        v = t_mask
        while True:
            sign = -1.0 if bin(v).count("1") % 2 else 1.0
            photon[t_mask] += sign * empty[comp | v]
            if v == 0:
                break
            v = (v - 1) & t_mask
    np.clip(photon, 0.0, 1.0, out=photon)

    # Fold in independent noise clicks per detector-bin.
    table = np.zeros_like(photon)
    for u_mask in range(16):
        quiet = (1.0 - p_noise) ** (4 - bin(u_mask).count("1"))
        t = u_mask
        while True:
            extra = bin(u_mask & ~t).count("1")
            table[u_mask] += photon[t] * (p_noise**extra) * quiet
            if t == 0:
                break
            t = (t - 1) & u_mask
    table.setflags(write=False)
    return table


def _accept_grids(
    params: ChannelParams, basis: str, n_max: int
) -> tuple[np.ndarray, np.ndarray]:
    """Accept and accept-and-error probabilities per photon-number pair.

    Both grids are averaged over the four equiprobable bit combinations;
    errors come from the equal-bit ones (singlet anticorrelation).
    """
    eta_a = params.transmittance_a()
    eta_b = params.transmittance_b()
    p_noise = params.noise_click_prob()
    acc = np.zeros((n_max + 1, n_max + 1))
    err = np.zeros((n_max + 1, n_max + 1))
    for bit_a in (0, 1):
        for bit_b in (0, 1):
            table = _pattern_table(
                eta_a, eta_b, params.misalignment, p_noise,
                basis, bit_a, basis, bit_b, n_max,
            )
            p_acc = (table[_ACCEPT_PATTERNS[0]] + table[_ACCEPT_PATTERNS[1]]) / 4.0
            acc += p_acc
            if bit_a == bit_b:
                err += p_acc
    return acc, err


def photon_pair_yields(
    params: ChannelParams, basis: str, n_max: int
) -> tuple[np.ndarray, np.ndarray]:
    """Exact yields Y[n, m] and error rates E[n, m] of the model.

    Y[n, m] is the BSM success probability given Alice emitted n photons
    and Bob m (uniform random bits); E[n, m] is the error fraction among
    successes (0 where Y vanishes).  Yields do not depend on the pulse
    intensities, only on the channel.
    """
    acc, err = _accept_grids(params, basis, n_max)
    with np.errstate(invalid="ignore", divide="ignore"):
        e = np.where(acc > 0.0, err / np.where(acc > 0.0, acc, 1.0), 0.0)
    return acc, e


def poisson_weights(intensity: float, tail: float = POISSON_TAIL) -> np.ndarray:
    """Poisson pmf values 0..N where the truncated tail mass is < tail."""
    if intensity < 0:
        raise ValueError("intensity must be non-negative")
    if intensity == 0.0:
        return np.array([1.0])
    weights = [math.exp(-intensity)]
    total = weights[0]
    n = 0
    while 1.0 - total >= tail:
        n += 1
        weights.append(weights[-1] * intensity / n)
        total += weights[-1]
    return np.array(weights)


def _basis_n_max(intensities: IntensitySet) -> int:
    return max(
        len(poisson_weights(i)) - 1
        for i in intensities.alice() + intensities.bob()
    )


def analytic_tables(
    params: ChannelParams, intensities: IntensitySet, basis: str
) -> MeasuredTables:
    """Exact expected gain/QBER matrix for all nine intensity pairs.

    Gains are the Poisson mixture of the kernel's photon-number-resolved
    yields, truncated where the Poisson tail mass drops below 1e-12.
    """
    if basis not in ("Z", "X"):
        raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}")
    n_max = _basis_n_max(intensities)
    acc, err = _accept_grids(params, basis, n_max)
    gain = np.zeros((3, 3))
    qber = np.full((3, 3), np.nan)
    for i, ia in enumerate(intensities.alice()):
        wa = poisson_weights(ia)
        for j, ib in enumerate(intensities.bob()):
            wb = poisson_weights(ib)
            g = float(wa @ acc[: len(wa), : len(wb)] @ wb)
            e = float(wa @ err[: len(wa), : len(wb)] @ wb)
            gain[i, j] = g
            if g > 0.0:
                qber[i, j] = e / g
    return MeasuredTables(basis, gain, qber, None)


def mc_bsm_trial(
    params: ChannelParams,
    state_a: PulseState,
    state_b: PulseState,
    rng: np.random.Generator,
) -> CoincidenceRecord:
    """One simulated Bell-state-measurement trial.

    Draws the emitted photon numbers, samples the click pattern from the
    exact photon-number-conditioned distribution, and classifies the
    singlet post-selection and the implied bit error.
    """
    n_a = int(rng.poisson(state_a.intensity))
    n_b = int(rng.poisson(state_b.intensity))
    n_max = max(n_a, n_b, 1)
    table = _pattern_table(
        params.transmittance_a(),
        params.transmittance_b(),
        params.misalignment,
        params.noise_click_prob(),
        state_a.basis,
        state_a.bit,
        state_b.basis,
        state_b.bit,
        n_max,
    )
    probs = table[:, n_a, n_b].copy()
    probs /= probs.sum()
    pattern = int(rng.choice(16, p=probs))
    accepted = pattern in _ACCEPT_PATTERNS
    error = accepted and state_a.bit == state_b.bit
    clicks = tuple(bool(pattern >> k & 1) for k in range(_N_MODES))
    return CoincidenceRecord(clicks, n_a, n_b, accepted, error)


def _pair_rng(seed: int, basis: str, i: int, j: int) -> np.random.Generator:
    """Independent stream per (seed, basis, intensity pair); order-free."""
    return np.random.default_rng(
        np.random.SeedSequence((seed, 0 if basis == "Z" else 1, i, j))
    )


def mc_tables(
    params: ChannelParams,
    intensities: IntensitySet,
    basis: str,
    trials_per_pair: int,
    seed: int,
) -> tuple[MeasuredTables, TrueSinglePhotonStats]:
    """Monte Carlo gain/QBER tables plus single-photon ground truth.

    Trials are grouped by (photon numbers, bit pair) and sampled from the
    exact per-group acceptance probabilities, which is distributionally
    identical to simulating trials one by one.  Fully deterministic given
    the seed; each intensity pair uses its own child stream, so pairs can
    be computed in any order (or in parallel) with identical results.
    """
    if basis not in ("Z", "X"):
        raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}")
    if trials_per_pair < 1:
        raise ValueError("trials_per_pair must be positive")
    alice = intensities.alice()
    bob = intensities.bob()

    draws = {}
    n_max = 1
    for i in range(3):
        for j in range(3):
            rng = _pair_rng(seed, basis, i, j)
            n = rng.poisson(alice[i], trials_per_pair)
            m = rng.poisson(bob[j], trials_per_pair)
            draws[i, j] = (rng, n, m)
            n_max = max(n_max, int(n.max()), int(m.max()))

    # Per-bit-pair acceptance probabilities on the (n, m) grid.
    eta_a = params.transmittance_a()
    eta_b = params.transmittance_b()
    p_noise = params.noise_click_prob()
    p_acc_bits = []
    for bit_a in (0, 1):
        for bit_b in (0, 1):
            table = _pattern_table(
                eta_a, eta_b, params.misalignment, p_noise,
                basis, bit_a, basis, bit_b, n_max,
            )
            p_acc_bits.append(table[_ACCEPT_PATTERNS[0]] + table[_ACCEPT_PATTERNS[1]])

    gain = np.zeros((3, 3))
    qber = np.full((3, 3), np.nan)
    qber_std = np.full((3, 3), np.nan)
    cnt11 = acc11 = err11 = 0
    for i in range(3):
        for j in range(3):
            rng, n, m = draws[i, j]
            cells = np.bincount(n * (n_max + 1) + m, minlength=(n_max + 1) ** 2)
            nonzero = np.flatnonzero(cells)
            accepted = errors = 0
            for cell in nonzero:
                cn, cm = divmod(int(cell), n_max + 1)
                count = int(cells[cell])
                bit_counts = rng.multinomial(count, [0.25] * 4)
                acc_k = rng.binomial(bit_counts, [p[cn, cm] for p in p_acc_bits])
                accepted += int(acc_k.sum())
                # bit pairs 0 -> (0,0) and 3 -> (1,1) are the equal-bit ones
                errors += int(acc_k[0] + acc_k[3])
                if cn == 1 and cm == 1:
                    cnt11 += count
                    acc11 += int(acc_k.sum())
                    err11 += int(acc_k[0] + acc_k[3])
            gain[i, j] = accepted / trials_per_pair
            if accepted > 0:
                e = errors / accepted
                qber[i, j] = e
                qber_std[i, j] = math.sqrt(e * (1.0 - e) / accepted)

    acc_grid, err_grid = _accept_grids(params, basis, max(n_max, 1))
    y11_exact = float(acc_grid[1, 1])
    e11_exact = float(err_grid[1, 1] / acc_grid[1, 1]) if acc_grid[1, 1] > 0 else 0.0
    y11_true = acc11 / cnt11 if cnt11 else 0.0
    e11_true = err11 / acc11 if acc11 else 0.0
    y11_radius = math.sqrt(y11_true * (1 - y11_true) / cnt11) if cnt11 else float("inf")
    e11_radius = math.sqrt(e11_true * (1 - e11_true) / acc11) if acc11 else float("inf")
    stats = TrueSinglePhotonStats(
        y11_true=y11_true,
        e11_true=e11_true,
        y11_radius=y11_radius,
        e11_radius=e11_radius,
        y11_exact=y11_exact,
        e11_exact=e11_exact,
        conditioned_trials=cnt11,
    )
    return MeasuredTables(basis, gain, qber, qber_std), stats
