"""End-to-end acceptance checks.

Each test prints a single PASS/FAIL line on the real terminal (bypassing
pytest capture) so a full run gives a one-line verdict per criterion.
"""
import math

import numpy as np
import pytest
import yaml

from mdiqkd import (
    ChannelParams,
    DecoyBounds,
    DegenerateBoundsError,
    IntensitySet,
    KeyRateInput,
    MeasuredTables,
    TimingParams,
    analytic_tables,
    binary_entropy,
    bootstrap_bound_sigmas,
    calibrate,
    delay_compensation,
    e11_upper,
    key_rate,
    mc_tables,
    photon_pair_yields,
    qm_pair,
    y11_lower,
)
from mdiqkd.channel import poisson_weights
from mdiqkd.cli import main
from mdiqkd.tableio import parse_tables, write_tables

REFERENCE_CHANNEL = ChannelParams(14.0, 22.0, attenuation=0.2,
                                  detector_efficiency=0.1,
                                  dark_count_prob=6e-6, background_prob=1e-6,
                                  misalignment=0.008)


def verdict(capfd, num, desc, ok):
    with capfd.disabled():
        print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {desc}")
    assert ok, f"criterion {num} failed: {desc}"


def test_criterion_01_z_basis_combinations(capfd, published_tables, published_intensities):
    tables_z, _ = published_tables
    qm1, qm2 = qm_pair(tables_z, published_intensities)
    ok = (abs(qm1 / 0.1846e-4 - 1.0) <= 5e-3
          and abs(qm2 / 3.668e-4 - 1.0) <= 5e-3)
    verdict(capfd, 1, "Z-basis gain combinations match published values "
            "within 0.5%", ok)


def test_criterion_02_single_photon_yield(capfd, published_tables, published_intensities):
    tables_z, _ = published_tables
    qm1, qm2 = qm_pair(tables_z, published_intensities)
    y11 = y11_lower(qm1, qm2, published_intensities)
    verdict(capfd, 2, "single-photon yield lower bound matches 2.219e-3 "
            "within 1%", abs(y11 / 2.219e-3 - 1.0) <= 1e-2)


def test_criterion_03_key_rate(capfd, published_intensities):
    gain_z = np.zeros((3, 3))
    gain_z[0, 0] = 1.819e-4
    qber_z = np.zeros((3, 3))
    qber_z[0, 0] = 0.0188
    tables_z = MeasuredTables("Z", gain_z, qber_z)
    tables_x = MeasuredTables("X", np.zeros((3, 3)), np.zeros((3, 3)))
    inp = KeyRateInput(published_intensities, tables_z, tables_x, 1.0 / 18.0, 1.16)
    bounds = DecoyBounds(
        qm1_z=0.1846e-4, qm2_z=3.668e-4, qm1_x=0.4353e-4, qm2_x=10.016e-4,
        y11_z_lower=2.219e-3, y11_x_lower=4.40e-3, e11_x_upper=0.0507,
        y11_z_raw=2.219e-3, y11_x_raw=4.40e-3, e11_x_raw=0.0507,
    )
    rate = key_rate(inp, bounds).rate_per_pulse
    verdict(capfd, 3, "key rate from published intermediates is 4.7e-6 "
            "within 2%", abs(rate / 4.7e-6 - 1.0) <= 2e-2)


def test_criterion_04_x_basis_discrepancy(capfd, published_tables,
                                          published_intensities, fixture_path,
                                          tmp_path):
    _, tables_x = published_tables
    qm1, _ = qm_pair(tables_x, published_intensities)
    # rounded-table evaluation reproduces the high-precision reference, and
    # visibly deviates from the published estimate built on unrounded counts
    matches_reference = abs(qm1 / 0.420e-4 - 1.0) <= 1e-2
    deviates_from_published = abs(qm1 / 0.4353e-4 - 1.0) > 2e-2
    out = tmp_path / "report.txt"
    code = main(["estimate", "--tables", fixture_path, "--e11", "0.0507",
                 "--out", str(out)])
    doc = yaml.safe_load(out.read_text())
    flagged = (code == 0 and doc["flags"]["e11_source"] == "override"
               and doc["bounds"]["qm1_x"] == pytest.approx(qm1, rel=1e-4))
    verdict(capfd, 4, "X-basis combination matches high-precision value, "
            "deviation from published estimate is visible and the override "
            "is flagged", matches_reference and deviates_from_published
            and flagged)


def test_criterion_05_timing(capfd):
    summary = calibrate(TimingParams(14.0, 22.0))
    ok = (abs(summary.thermal_ps / 0.14 - 1.0) <= 0.3
          and abs(summary.residual_ps) <= 5.0
          and summary.overlap_ok)
    verdict(capfd, 5, "timing calibration gives 0.14 ps thermal drift, "
            "residual within 5 ps and overlap pass", ok)


def test_criterion_06_decoy_bracketing(capfd):
    rng = np.random.default_rng(20240817)
    intensities = IntensitySet.symmetric(0.4, 0.1, 0.01)
    trials = 200_000
    checked_y = checked_e = 0
    failures = []
    for k in range(20):
        params = ChannelParams(
            length_a=rng.uniform(2.0, 25.0),
            length_b=rng.uniform(2.0, 25.0),
            attenuation=0.2,
            detector_efficiency=rng.uniform(0.1, 0.3),
            dark_count_prob=10.0 ** rng.uniform(-6.5, -5.0),
            background_prob=1e-6,
            misalignment=rng.uniform(0.0, 0.03),
        )
        seed = int(rng.integers(1 << 31))
        tz, sz = mc_tables(params, intensities, "Z", trials, seed)
        tx, sx = mc_tables(params, intensities, "X", trials, seed)
        sig = bootstrap_bound_sigmas(tz, tx, intensities, trials, seed=seed)
        qm1_z, qm2_z = qm_pair(tz, intensities)
        qm1_x, qm2_x = qm_pair(tx, intensities)
        yz = y11_lower(qm1_z, qm2_z, intensities)
        yx = y11_lower(qm1_x, qm2_x, intensities)
        sig_yz = math.hypot(sig["y11_z_lower"], sz.y11_radius)
        sig_yx = math.hypot(sig["y11_x_lower"], sx.y11_radius)
        checked_y += 2
        if yz > sz.y11_true + 3.0 * sig_yz:
            failures.append((k, "y11_z", yz, sz.y11_true, sig_yz))
        if yx > sx.y11_true + 3.0 * sig_yx:
            failures.append((k, "y11_x", yx, sx.y11_true, sig_yx))
        if yx > 0.0:
            e11 = e11_upper(tx, intensities, yx)
            sig_e = math.hypot(sig["e11_x_upper"], sx.e11_radius)
            checked_e += 1
            if e11 < sx.e11_true - 3.0 * sig_e:
                failures.append((k, "e11_x", e11, sx.e11_true, sig_e))
    ok = not failures and checked_y == 40 and checked_e >= 10
    verdict(capfd, 6, f"decoy bounds bracket Monte Carlo single-photon truth "
            f"within 3 sigma on 20 random channels "
            f"({checked_y + checked_e} checks, {len(failures)} violations)", ok)


def test_criterion_07_exact_poisson_consistency(capfd):
    intensities = IntensitySet.symmetric(0.4, 0.1, 0.01)
    ok = True
    for params in (REFERENCE_CHANNEL,
                   ChannelParams(5.0, 8.0, detector_efficiency=0.25,
                                 dark_count_prob=1e-6, misalignment=0.02)):
        for basis in ("Z", "X"):
            n_max = len(poisson_weights(0.4)) - 1
            y_grid, _ = photon_pair_yields(params, basis, n_max)
            tab = analytic_tables(params, intensities, basis)
            qm1, qm2 = qm_pair(tab, intensities)
            bound = y11_lower(qm1, qm2, intensities)
            ok = ok and bound <= y_grid[1, 1] * (1.0 + 1e-12)
    verdict(capfd, 7, "yield lower bound never exceeds the exact "
            "single-photon yield on analytic tables", ok)


def test_criterion_08_x_basis_error_floor(capfd):
    intensities = IntensitySet.symmetric(0.4, 0.1, 0.01)
    tab = analytic_tables(REFERENCE_CHANNEL, intensities, "X")
    e_mu_mu = tab.qber[0, 0]
    verdict(capfd, 8, "simulated signal-signal X-basis error rate lies in "
            "[0.25, 0.35]", 0.25 <= e_mu_mu <= 0.35)


def test_criterion_09_invariants(capfd):
    grid = np.linspace(0.0, 1.0, 10_000)
    h = np.array([binary_entropy(p) for p in grid])
    symmetric = np.allclose(h, h[::-1], atol=1e-12)
    monotone = np.all(np.diff(h[grid <= 0.5]) >= -1e-12)

    rng = np.random.default_rng(7)
    residual_ok = True
    for _ in range(500):
        delta_ns = rng.uniform(-100.0, 100.0)
        res_ps = rng.uniform(0.5, 50.0)
        _, residual = delay_compensation(delta_ns, res_ps)
        residual_ok = residual_ok and abs(residual) <= res_ps / 2 + 1e-9
    intensities = IntensitySet.symmetric(0.4, 0.1, 0.01)
    t1, s1 = mc_tables(REFERENCE_CHANNEL, intensities, "Z", 30_000, seed=5)
    t2, s2 = mc_tables(REFERENCE_CHANNEL, intensities, "Z", 30_000, seed=5)
    deterministic = (np.array_equal(t1.gain, t2.gain)
                     and np.array_equal(np.nan_to_num(t1.qber),
                                        np.nan_to_num(t2.qber))
                     and s1 == s2)
    verdict(capfd, 9, "entropy symmetry/monotonicity, residual bound and "
            "seeded Monte Carlo determinism all hold",
            symmetric and monotone and residual_ok and deterministic)


def _tables_lines():
    lines = ["basis,ia,ib,gain,qber,qber_std,accepted"]
    for basis in ("Z", "X"):
        for ia in ("mu", "nu", "omega"):
            for ib in ("mu", "nu", "omega"):
                lines.append(f"{basis},{ia},{ib},1e-4,0.1,,")
    return lines


def _malformed_corpus():
    base = _tables_lines()
    cases = [
        ("", 2),
        ("gain,qber\n", 2),
        ("\n".join(base[:-1]) + "\n", 2),                       # missing row
        ("\n".join(base + [base[1]]) + "\n", 2),                # duplicate row
        ("\n".join(base).replace("Z,mu,mu,", "Y,mu,mu,", 1) + "\n", 2),
        ("\n".join(base).replace("Z,mu,nu,", "Z,mu,kappa,", 1) + "\n", 2),
        ("\n".join(base).replace("mu,mu,1e-4", "mu,mu,abc", 1) + "\n", 2),
        ("\n".join(base).replace("Z,mu,mu,1e-4,0.1,,",
                                 "Z,mu,mu,1e-4,0.1,", 1) + "\n", 2),
        ("\n".join(base).replace("Z,mu,mu,1e-4", "Z,mu,mu,-1e-4", 1) + "\n", 3),
        ("\n".join(base).replace("Z,mu,mu,1e-4", "Z,mu,mu,1.5", 1) + "\n", 3),
        ("\n".join(base).replace("Z,mu,mu,1e-4,0.1",
                                 "Z,mu,mu,1e-4,1.5", 1) + "\n", 3),
        ("\n".join(base).replace("Z,mu,mu,1e-4,0.1,,",
                                 "Z,mu,mu,1e-4,0.1,-0.01,", 1) + "\n", 3),
        ("\n".join(base).replace("Z,mu,mu,1e-4,0.1,,",
                                 "Z,mu,mu,1e-4,0.1,,3.5", 1) + "\n", 3),
    ]
    return cases


def test_criterion_10_round_trip(capfd, fixture_text, tmp_path):
    tz1, tx1 = parse_tables(fixture_text)
    tz2, tx2 = parse_tables(write_tables(tz1, tx1))
    exact = all(
        np.array_equal(a, b, equal_nan=True)
        for t1, t2 in ((tz1, tz2), (tx1, tx2))
        for a, b in ((t1.gain, t2.gain), (t1.qber, t2.qber),
                     (t1.qber_std, t2.qber_std))
    )
    rejected = []
    for i, (content, expected) in enumerate(_malformed_corpus()):
        path = tmp_path / f"bad{i}.csv"
        path.write_text(content)
        code = main(["estimate", "--tables", str(path)])
        rejected.append(code == expected)
    n = len(rejected)
    verdict(capfd, 10, f"round trip preserves every field exactly and all "
            f"{n} malformed inputs are rejected with the expected exit "
            f"codes", exact and n >= 10 and all(rejected))
