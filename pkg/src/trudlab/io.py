"""Byte-stable text artifacts: field and certificate CSVs, trace directories, reports.

Floats are written with 17 significant digits, columns in a fixed order and
lines end with ``'\\n'``, so the same artifact always produces the same bytes.
"""
from __future__ import annotations

import csv
import os
from pathlib import Path

import numpy as np

from .eigensolver import EigenPair
from .fields import EvolutionTrace, ScalarField
from .operators import lp_norm
from .verification import AuditReport, ComparisonCertificate

__all__ = [
    "export_csv",
    "fmt",
    "read_field_csv",
    "report_line",
    "write_field_csv",
    "write_report",
    "write_trace",
]


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_rows(path, header, rows):
    path = Path(path)
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(x) if not isinstance(x, str) else x for x in row])
    return path


def write_field_csv(field: ScalarField, path):
    """Rows ``x[,y],value`` for every node of the closed domain, row-major."""
    d = field.domain
    coords = d.coords()
    mask = d.inside_mask
    names = ["x", "y"][: d.dim] + ["value"]
    cols = [c[mask] for c in coords] + [field.values[mask]]
    return _write_rows(path, names, zip(*cols))


def read_field_csv(domain, path) -> ScalarField:
    """Inverse of :func:`write_field_csv` on the same grid (nodes matched by position)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    vals = np.zeros(domain.shape)
    origin = np.asarray(domain.origin, dtype=float)
    idx = np.rint((data[:, : domain.dim] - origin) / domain.h).astype(int)
    if np.any(idx < 0) or np.any(idx >= np.asarray(domain.shape)):
        raise ValueError(f"{path}: node coordinates fall outside the grid")
    vals[tuple(idx.T)] = data[:, -1]
    return ScalarField(domain, np.where(domain.interior_mask, vals, 0.0))


def write_certificate_csv(cert: ComparisonCertificate, path):
    return _write_rows(path, ["t", "I"], zip(cert.times, cert.values))


def report_line(report: AuditReport) -> str:
    """One line: check name, passed, worst margin, tolerance, then sorted scalar parameters."""
    parts = [
        f"check={report.check}",
        f"passed={fmt(report.passed)}",
        f"worst_margin={fmt(report.worst_margin)}",
        f"tolerance={fmt(report.tolerance)}",
        f"checked_points={report.checked_points}",
        f"violations={len(report.violations)}",
    ]
    for key in sorted(report.params):
        val = report.params[key]
        if isinstance(val, (list, tuple, np.ndarray)):
            continue
        parts.append(f"{key}={val if isinstance(val, str) else fmt(val)}")
    return " ".join(parts)


def write_report(reports, path, extra_lines=()):
    lines = [report_line(r) if isinstance(r, AuditReport) else str(r) for r in reports]
    lines.extend(extra_lines)
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="ascii")
    return Path(path)


def write_report_csv(report: AuditReport, path):
    """Violations of a report as ``node,t,margin`` rows (node indices joined by ':')."""
    rows = [(":".join(str(i) for i in node), t, m) for node, t, m in report.violations]
    return _write_rows(path, ["node", "t", "margin"], rows)


def eigen_summary(pair: EigenPair) -> str:
    return (
        f"p={fmt(pair.p)} h={fmt(pair.u.domain.h)} lambda={fmt(pair.lam)} "
        f"residual={fmt(pair.residual)} iterations={pair.iterations}"
    )


def write_trace(trace: EvolutionTrace, directory):
    """Snapshot CSVs plus ``index.csv`` (time, filename, lp_norm, min, max)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    inn = trace.domain.interior_mask
    width = max(5, len(str(len(trace) - 1)))
    rows = []
    for k, t in enumerate(trace.times):
        name = f"snapshot_{k:0{width}d}.csv"
        f = trace.field_at(k)
        write_field_csv(f, directory / name)
        vals = f.values[inn]
        rows.append((t, name, lp_norm(f, trace.p), vals.min(), vals.max()))
    _write_rows(directory / "index.csv", ["time", "filename", "lp_norm", "min", "max"], rows)
    return directory


def export_csv(artifact, path):
    """Write a field, eigenpair, trace, certificate or report as CSV.

    Traces go to a directory (``path``) with an index file; everything else
    to a single file.
    """
    parent = Path(path).parent
    if not parent.exists() or not os.access(parent, os.W_OK):
        raise OSError(f"cannot write to {path}")
    if isinstance(artifact, ScalarField):
        return write_field_csv(artifact, path)
    if isinstance(artifact, EigenPair):
        return write_field_csv(artifact.u, path)
    if isinstance(artifact, EvolutionTrace):
        return write_trace(artifact, path)
    if isinstance(artifact, ComparisonCertificate):
        return write_certificate_csv(artifact, path)
    if isinstance(artifact, AuditReport):
        return write_report_csv(artifact, path)
    raise TypeError(f"cannot export {type(artifact).__name__}")
