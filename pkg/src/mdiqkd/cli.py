"""Command-line interface: estimate, simulate, timing, sweep.

Exit codes: 0 success, 2 usage or parse error, 3 validation error,
4 degenerate decoy bounds (no key extractable).  Output files are only
written after the whole computation has succeeded, so a failing run
leaves no partial artifacts.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .channel import ChannelParams, analytic_tables, mc_tables
from .decoy import (
    DegenerateBoundsError,
    IntensitySet,
    KeyRateInput,
    bootstrap_bound_sigmas,
    estimate_all,
)
from .tableio import (
    ParseError,
    ValidationError,
    build_report,
    emit_report,
    parse_tables,
    write_tables,
)
from .timing import TimingParams, calibrate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_DEGENERATE = 4

DEFAULT_Q = 1.0 / 18.0
DEFAULT_F = 1.16

SWEEP_AXES = ("length", "intensity", "dark", "misalignment")


def _write_output(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _intensities(args) -> IntensitySet:
    return IntensitySet.symmetric(args.mu, args.nu, args.omega)


def _channel(args) -> ChannelParams:
    return ChannelParams(
        length_a=args.len_a,
        length_b=args.len_b,
        attenuation=args.attenuation,
        detector_efficiency=args.det_eff,
        dark_count_prob=args.dark,
        background_prob=args.background,
        misalignment=args.misalign,
    )


def _add_intensity_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mu", type=float, default=0.4, help="signal intensity")
    p.add_argument("--nu", type=float, default=0.1, help="decoy intensity")
    p.add_argument("--omega", type=float, default=0.01, help="vacuum intensity")
    p.add_argument("--q", type=float, default=DEFAULT_Q,
                   help="probability both parties send signal-state Z pulses")
    p.add_argument("--f", type=float, default=DEFAULT_F,
                   help="error-correction efficiency")
    p.add_argument("--n-pulses", type=float, default=None,
                   help="total emitted pulse pairs (for absolute key length)")


def _add_channel_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--len-a", type=float, default=14.0, help="Charlie-Alice fiber (km)")
    p.add_argument("--len-b", type=float, default=22.0, help="Charlie-Bob fiber (km)")
    p.add_argument("--attenuation", type=float, default=0.2, help="fiber loss (dB/km)")
    p.add_argument("--det-eff", type=float, default=0.1, help="detector efficiency")
    p.add_argument("--dark", type=float, default=6e-6,
                   help="dark-count probability per detector per gate")
    p.add_argument("--background", type=float, default=1e-6,
                   help="background-click probability per gate")
    p.add_argument("--misalign", type=float, default=0.008,
                   help="mode-mismatch / extinction fraction")
    p.add_argument("--trials", type=int, default=100_000,
                   help="Monte Carlo trials per intensity pair")
    p.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")


def cmd_estimate(args) -> int:
    content = Path(args.tables).read_text()
    tables_z, tables_x = parse_tables(content)
    inp = KeyRateInput(_intensities(args), tables_z, tables_x, args.q, args.f,
                       args.n_pulses)
    result = estimate_all(inp, e11_override=args.e11)
    report = build_report(inp, result, provenance="measured",
                          e11_override=args.e11)
    text = emit_report(report)
    _write_output(text, args.out)
    if args.plot:
        from .plotting import save_tables_figure

        save_tables_figure(tables_z, tables_x, args.plot)
    return EXIT_OK


def _mc_audit(params, intensities, tables_z, tables_x, stats_z, stats_x,
              bounds, trials, seed) -> dict:
    """Bracketing audit: decoy bounds vs Monte Carlo single-photon truth."""
    sig = bootstrap_bound_sigmas(tables_z, tables_x, intensities, trials,
                                 seed=seed)
    sig_yz = math.hypot(sig["y11_z_lower"], stats_z.y11_radius)
    sig_yx = math.hypot(sig["y11_x_lower"], stats_x.y11_radius)
    sig_e = math.hypot(sig["e11_x_upper"], stats_x.e11_radius)
    return {
        "y11_z_true": stats_z.y11_true,
        "y11_x_true": stats_x.y11_true,
        "e11_x_true": stats_x.e11_true,
        "y11_z_sigma": sig_yz,
        "y11_x_sigma": sig_yx,
        "e11_x_sigma": sig_e,
        "y11_z_bracket_ok": bounds.y11_z_lower <= stats_z.y11_true + 3 * sig_yz,
        "y11_x_bracket_ok": bounds.y11_x_lower <= stats_x.y11_true + 3 * sig_yx,
        "e11_x_bracket_ok": bounds.e11_x_upper >= stats_x.e11_true - 3 * sig_e,
        "conditioned_trials_z": stats_z.conditioned_trials,
        "conditioned_trials_x": stats_x.conditioned_trials,
    }


def cmd_simulate(args) -> int:
    params = _channel(args)
    intensities = _intensities(args)
    audit = None
    if args.mode == "analytic":
        tables_z = analytic_tables(params, intensities, "Z")
        tables_x = analytic_tables(params, intensities, "X")
    else:
        tables_z, stats_z = mc_tables(params, intensities, "Z", args.trials,
                                      args.seed)
        tables_x, stats_x = mc_tables(params, intensities, "X", args.trials,
                                      args.seed)
    inp = KeyRateInput(intensities, tables_z, tables_x, args.q, args.f,
                       args.n_pulses)
    result = estimate_all(inp)
    if args.mode == "mc":
        audit = _mc_audit(params, intensities, tables_z, tables_x, stats_z,
                          stats_x, result.bounds, args.trials, args.seed)
    report = build_report(inp, result, provenance="simulated", audit=audit)
    report_text = emit_report(report)
    tables_text = write_tables(tables_z, tables_x)
    tables_out = args.tables_out
    if tables_out is None and args.out is not None:
        tables_out = str(Path(args.out).with_suffix(".tables.csv"))
    _write_output(report_text, args.out)
    if tables_out is not None:
        Path(tables_out).write_text(tables_text)
    elif args.out is None:
        # Everything to stdout: tables after the report, comment-separated.
        sys.stdout.write("# --- tables ---\n")
        sys.stdout.write(tables_text)
    if args.plot:
        from .plotting import save_tables_figure

        save_tables_figure(tables_z, tables_x, args.plot)
    return EXIT_OK


def cmd_timing(args) -> int:
    params = TimingParams(
        length_a0=args.len_a,
        length_b0=args.len_b,
        group_index_1550=args.ng1550,
        group_index_1310=args.ng1310,
        alpha_t=args.alpha_t,
        delta_t_celsius=args.delta_t,
        delay_resolution=args.resolution,
        pulse_width=args.pulse_width,
    )
    summary = calibrate(params, threshold=args.threshold)
    lines = [
        f"delta_t0_ns: {summary.delta_t0_ns:.6g}",
        f"thermal_ps: {summary.thermal_ps:.6g}",
        f"delay_setting: {summary.delay_setting}",
        f"residual_ps: {summary.residual_ps:.6g}",
        f"mismatch_ratio: {summary.mismatch_ratio:.6g}",
        f"overlap: {'pass' if summary.overlap_ok else 'fail'}",
    ]
    _write_output("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _sweep_point(args, axis: str, value: float):
    params = _channel(args)
    intensities = _intensities(args)
    if axis == "length":
        total = params.length_a + params.length_b
        frac = params.length_a / total if total > 0 else 0.5
        params = dataclasses.replace(
            params, length_a=value * frac, length_b=value * (1.0 - frac)
        )
    elif axis == "intensity":
        intensities = IntensitySet.symmetric(value, args.nu, args.omega)
    elif axis == "dark":
        params = dataclasses.replace(params, dark_count_prob=value)
    elif axis == "misalignment":
        params = dataclasses.replace(params, misalignment=value)
    if args.mode == "analytic":
        tables_z = analytic_tables(params, intensities, "Z")
        tables_x = analytic_tables(params, intensities, "X")
    else:
        tables_z, _ = mc_tables(params, intensities, "Z", args.trials, args.seed)
        tables_x, _ = mc_tables(params, intensities, "X", args.trials, args.seed)
    inp = KeyRateInput(intensities, tables_z, tables_x, args.q, args.f,
                       args.n_pulses)
    return estimate_all(inp)


def cmd_sweep(args) -> int:
    if args.steps < 1:
        raise ValidationError("--steps must be at least 1")
    if args.steps == 1:
        values = [args.start]
    else:
        values = list(np.linspace(args.start, args.stop, args.steps))
    rows = []
    for value in values:
        try:
            result = _sweep_point(args, args.axis, float(value))
            b = result.bounds
            rows.append(
                (value, result.rate_per_pulse, b.y11_z_lower, b.y11_x_lower,
                 b.e11_x_upper, "ok")
            )
        except (DegenerateBoundsError, ValueError):
            rows.append((value, 0.0, float("nan"), float("nan"), float("nan"),
                         "degenerate"))
    lines = ["axis,value,rate_per_pulse,y11_z_lower,y11_x_lower,e11_x_upper,flag"]
    for value, rate, yz, yx, e11, flag in rows:
        lines.append(
            f"{args.axis},{value:.8g},{rate:.8g},{yz:.8g},{yx:.8g},{e11:.8g},{flag}"
        )
    _write_output("\n".join(lines) + "\n", args.out)
    if args.plot:
        from .plotting import save_sweep_figure

        save_sweep_figure([r[0] for r in rows], [r[1] for r in rows],
                          args.axis, args.plot)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdiqkd",
        description="Decoy-state MDI-QKD key-rate estimation, channel "
        "simulation and timing calibration.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="key rate from a measured-tables file")
    p.add_argument("--tables", required=True, help="delimited gain/QBER file")
    _add_intensity_args(p)
    p.add_argument("--e11", type=float, default=None,
                   help="externally known single-photon error bound "
                   "(overrides the X-table derivation)")
    p.add_argument("--out", default=None, help="report file (default stdout)")
    p.add_argument("--plot", default=None, help="render table heatmaps to this file")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="generate tables from a channel model")
    p.add_argument("--mode", choices=("analytic", "mc"), default="analytic")
    _add_channel_args(p)
    _add_intensity_args(p)
    p.add_argument("--out", default=None, help="report file (default stdout)")
    p.add_argument("--tables-out", default=None, help="tables file")
    p.add_argument("--plot", default=None, help="render table heatmaps to this file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("timing", help="passive timing-calibration calculator")
    p.add_argument("--len-a", type=float, default=14.0)
    p.add_argument("--len-b", type=float, default=22.0)
    p.add_argument("--ng1550", type=float, default=1.4682)
    p.add_argument("--ng1310", type=float, default=1.4672)
    p.add_argument("--alpha-t", type=float, default=5.4e-7)
    p.add_argument("--delta-t", type=float, default=10.0)
    p.add_argument("--resolution", type=float, default=10.0)
    p.add_argument("--pulse-width", type=float, default=2.0)
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_timing)

    p = sub.add_parser("sweep", help="key rate over a parameter grid")
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--mode", choices=("analytic", "mc"), default="analytic")
    _add_channel_args(p)
    _add_intensity_args(p)
    p.add_argument("--out", default=None, help="curve file (default stdout)")
    p.add_argument("--plot", default=None, help="render the rate curve to this file")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateBoundsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
