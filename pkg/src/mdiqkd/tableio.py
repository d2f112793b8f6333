"""File formats: measured-table ingestion and analysis-report emission.

Table files are UTF-8 comma-delimited text with the mandatory header

    basis,ia,ib,gain,qber,qber_std,accepted

one record per (basis, Alice intensity, Bob intensity) combination, nine
records per basis, intensity labels mu/nu/omega.  Trailing fields may be
empty; lines starting with '#' are comments.  Gains are absolute
probabilities (not scaled by 1e4).

Reports are deterministic key-value documents (YAML-compatible) with
fixed key order and numbers at six significant digits.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .decoy import (
    INTENSITY_LABELS,
    DecoyBounds,
    IntensitySet,
    KeyRateInput,
    KeyRateResult,
    MeasuredTables,
)

SCHEMA_VERSION = 1

_HEADER = ("basis", "ia", "ib", "gain", "qber", "qber_std", "accepted")


class ParseError(ValueError):
    """Structurally malformed table file (carries the 1-based line number)."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ValidationError(ValueError):
    """Well-formed input whose values violate a physical invariant."""


def qber_std(error_count: int, accepted_count: int) -> float:
    """Binomial standard error sqrt(p(1-p)/n) of a measured QBER."""
    if accepted_count < 1:
        raise ValidationError("qber_std undefined for zero accepted events")
    if not (0 <= error_count <= accepted_count):
        raise ValidationError("error count must lie in [0, accepted count]")
    p = error_count / accepted_count
    return math.sqrt(p * (1.0 - p) / accepted_count)


def _parse_float(text: str, what: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{what} is not a number: {text!r}", line) from None
    if not math.isfinite(value):
        raise ParseError(f"{what} must be finite: {text!r}", line)
    return value


def parse_tables(content: str) -> tuple[MeasuredTables, MeasuredTables]:
    """Parse both bases' tables from delimited text.

    Returns (Z tables, X tables).  Raises ParseError for malformed rows,
    missing/duplicate records or a bad header, ValidationError for values
    outside physical range.
    """
    gain = {"Z": np.full((3, 3), np.nan), "X": np.full((3, 3), np.nan)}
    qber = {"Z": np.full((3, 3), np.nan), "X": np.full((3, 3), np.nan)}
    qstd = {"Z": np.full((3, 3), np.nan), "X": np.full((3, 3), np.nan)}
    seen: set[tuple[str, int, int]] = set()
    header_done = False
    for lineno, raw in enumerate(content.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = next(csv.reader([line]))
        fields = [f.strip() for f in fields]
        if not header_done:
            if tuple(f.lower() for f in fields) != _HEADER:
                raise ParseError(
                    f"expected header {','.join(_HEADER)!r}, got {line!r}", lineno
                )
            header_done = True
            continue
        if len(fields) != len(_HEADER):
            raise ParseError(
                f"expected {len(_HEADER)} fields, got {len(fields)}", lineno
            )
        basis, ia, ib, g_s, e_s, std_s, acc_s = fields
        basis = basis.upper()
        if basis not in ("Z", "X"):
            raise ParseError(f"unknown basis {basis!r}", lineno)
        try:
            i = INTENSITY_LABELS.index(ia)
            j = INTENSITY_LABELS.index(ib)
        except ValueError:
            raise ParseError(
                f"intensity labels must be one of {INTENSITY_LABELS}, "
                f"got ({ia!r}, {ib!r})",
                lineno,
            ) from None
        if (basis, i, j) in seen:
            raise ParseError(f"duplicate record for ({basis},{ia},{ib})", lineno)
        seen.add((basis, i, j))
        g = _parse_float(g_s, "gain", lineno)
        e = _parse_float(e_s, "qber", lineno)
        if not (0.0 <= g <= 1.0):
            raise ValidationError(f"line {lineno}: gain {g} outside [0, 1]")
        if not (0.0 <= e <= 1.0):
            raise ValidationError(f"line {lineno}: qber {e} outside [0, 1]")
        gain[basis][i, j] = g
        qber[basis][i, j] = e
        if std_s:
            std = _parse_float(std_s, "qber_std", lineno)
            if std < 0:
                raise ValidationError(f"line {lineno}: qber_std must be >= 0")
            qstd[basis][i, j] = std
        elif acc_s:
            acc = _parse_float(acc_s, "accepted", lineno)
            if acc < 1 or acc != int(acc):
                raise ValidationError(
                    f"line {lineno}: accepted count must be a positive integer"
                )
            qstd[basis][i, j] = math.sqrt(e * (1.0 - e) / acc)
    if not header_done:
        raise ParseError("empty input: no header found")
    for basis in ("Z", "X"):
        missing = [
            f"({basis},{INTENSITY_LABELS[i]},{INTENSITY_LABELS[j]})"
            for i in range(3)
            for j in range(3)
            if (basis, i, j) not in seen
        ]
        if missing:
            raise ParseError(
                f"incomplete {basis}-basis table, missing {', '.join(missing)}"
            )
    out = []
    for basis in ("Z", "X"):
        std = qstd[basis] if np.any(np.isfinite(qstd[basis])) else None
        out.append(MeasuredTables(basis, gain[basis], qber[basis], std))
    return out[0], out[1]


def write_tables(tables_z: MeasuredTables, tables_x: MeasuredTables) -> str:
    """Serialize both tables in the delimited input format, full precision."""
    lines = [",".join(_HEADER)]
    for tab in (tables_z, tables_x):
        for i in range(3):
            for j in range(3):
                e = tab.qber[i, j]
                std = tab.qber_std[i, j] if tab.qber_std is not None else float("nan")
                lines.append(
                    ",".join(
                        (
                            tab.basis,
                            INTENSITY_LABELS[i],
                            INTENSITY_LABELS[j],
                            repr(float(tab.gain[i, j])),
                            repr(float(e)) if math.isfinite(e) else "",
                            repr(float(std)) if math.isfinite(std) else "",
                            "",
                        )
                    )
                )
    return "\n".join(lines) + "\n"


@dataclass
class AnalysisReport:
    """Everything a pipeline run produced, plus the inputs that produced it."""

    provenance: str  # "measured" or "simulated"
    intensities: IntensitySet
    q: float
    f: float
    n_pulses: Optional[float]
    e11_override: Optional[float]
    bounds: DecoyBounds
    result: KeyRateResult
    flags: dict = field(default_factory=dict)
    audit: Optional[dict] = None


def build_report(
    inp: KeyRateInput,
    result: KeyRateResult,
    provenance: str = "measured",
    e11_override: Optional[float] = None,
    audit: Optional[dict] = None,
) -> AnalysisReport:
    """Assemble a report, deriving the clamp/override flags from the result."""
    b = result.bounds
    flags = {
        "e11_source": "override" if e11_override is not None else "tables",
        "y11_z_clamped": b.y11_z_lower != b.y11_z_raw,
        "y11_x_clamped": b.y11_x_lower != b.y11_x_raw,
        "e11_clamped": b.e11_x_upper != b.e11_x_raw,
        "rate_clamped": result.rate_per_pulse != result.rate_raw,
    }
    return AnalysisReport(
        provenance=provenance,
        intensities=inp.intensities,
        q=inp.q,
        f=inp.f,
        n_pulses=inp.n_pulses,
        e11_override=e11_override,
        bounds=b,
        result=result,
        flags=flags,
        audit=audit,
    )


def _fmt(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def emit_report(report: AnalysisReport) -> str:
    """Deterministic text rendering of a report (fixed key order, 6 sig. digits)."""
    s = report.intensities
    b = report.bounds
    r = report.result
    sections: list[tuple[str, list[tuple[str, object]]]] = [
        (
            "inputs",
            [
                ("provenance", report.provenance),
                ("mu_a", s.mu_a),
                ("nu_a", s.nu_a),
                ("omega_a", s.omega_a),
                ("mu_b", s.mu_b),
                ("nu_b", s.nu_b),
                ("omega_b", s.omega_b),
                ("q", report.q),
                ("f", report.f),
                ("n_pulses", report.n_pulses),
                ("e11_override", report.e11_override),
            ],
        ),
        (
            "bounds",
            [
                ("qm1_z", b.qm1_z),
                ("qm2_z", b.qm2_z),
                ("qm1_x", b.qm1_x),
                ("qm2_x", b.qm2_x),
                ("y11_z_lower", b.y11_z_lower),
                ("y11_x_lower", b.y11_x_lower),
                ("e11_x_upper", b.e11_x_upper),
                ("y11_z_raw", b.y11_z_raw),
                ("y11_x_raw", b.y11_x_raw),
                ("e11_x_raw", b.e11_x_raw),
            ],
        ),
        (
            "key_rate",
            [
                ("rate_per_pulse", r.rate_per_pulse),
                ("rate_raw", r.rate_raw),
                ("q11_z_lower", r.q11_z_lower),
                ("entropy_e11", r.entropy_e11),
                ("entropy_qber", r.entropy_qber),
                ("total_key_bits", r.total_key_bits),
            ],
        ),
        ("flags", sorted(report.flags.items())),
    ]
    if report.audit is not None:
        sections.append(("audit", sorted(report.audit.items())))
    out = io.StringIO()
    out.write(f"schema: {SCHEMA_VERSION}\n")
    for name, entries in sections:
        out.write(f"{name}:\n")
        for key, value in entries:
            out.write(f"  {key}: {_fmt(value)}\n")
    return out.getvalue()
