"""Deterministic experiment artifacts: CSV tables, JSON manifests, atomic writes.

Every CSV is written with 17-significant-digit floats and Unix line endings,
so identical arrays serialize to identical bytes and reruns of a seeded
experiment can be compared with ``cmp``.  Files land via a temporary file in
the target directory followed by ``os.replace``, so readers never observe a
half-written artifact.  Manifests are JSON and carry run metadata (config
echo, versions, wall time); they are the one artifact class exempt from
byte-identity because wall time varies.
"""

from __future__ import annotations

import json
import os
import platform
import tempfile
from typing import Sequence

import numpy as np

from . import __version__
from .diagnostics import AuditReport
from .errors import ConfigurationError
from .integrators import Trajectory
from .kernels import backend_name

__all__ = [
    "FLOAT_FMT",
    "format_float",
    "atomic_write_text",
    "write_csv",
    "read_csv",
    "write_trajectory_csv",
    "write_field_csv",
    "write_audit_csv",
    "write_manifest",
    "manifest_payload",
]

#: printf format reproducing a double exactly on round trip.
FLOAT_FMT = "%.17g"


def format_float(v: float) -> str:
    return FLOAT_FMT % float(v)


def atomic_write_text(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a same-directory temp file + replace."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-io-")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: Sequence[str], rows) -> None:
    """Write a numeric table: one comma-joined header line, then %.17g rows."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != len(header):
        raise ConfigurationError(
            f"csv '{path}': {len(header)} header fields but rows have {rows.shape[1]} columns"
        )
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path: str):
    """Read a table written by :func:`write_csv`: (header list, float array).

    Comment lines starting with ``#`` are skipped.  Raises
    :class:`ConfigurationError` on ragged or non-numeric rows.
    """
    with open(path, "r") as fh:
        raw = [line.strip() for line in fh]
    lines = [line for line in raw if line and not line.startswith("#")]
    if not lines:
        raise ConfigurationError(f"csv '{path}' has no content")
    header = [name.strip() for name in lines[0].split(",")]
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise ConfigurationError(
                f"csv '{path}' line {lineno}: expected {len(header)} fields, got {len(parts)}"
            )
        try:
            rows.append([float(tok) for tok in parts])
        except ValueError as exc:
            raise ConfigurationError(f"csv '{path}' line {lineno}: {exc}") from exc
    return header, np.asarray(rows, dtype=float)


def trajectory_header(traj: Trajectory) -> list:
    n = traj.states.shape[1]
    m = traj.inputs.shape[1]
    k = traj.outputs.shape[1]
    header = ["t"]
    header += [f"z_{i + 1}" for i in range(n)]
    header += [f"u_{i + 1}" for i in range(m)]
    header += [f"y_{i + 1}" for i in range(k)]
    header += ["H", "power_residual"]
    return header


def write_trajectory_csv(path: str, traj: Trajectory) -> None:
    """Serialize a run: columns t, z_1.., u_1.., y_1.., H, power_residual."""
    table = np.column_stack(
        [
            traj.grid.t,
            traj.states,
            traj.inputs,
            traj.outputs,
            traj.storage,
            traj.power_residual,
        ]
    )
    write_csv(path, trajectory_header(traj), table)


def write_field_csv(path: str, points, values, value_name: str = "value") -> None:
    """Serialize samples of a scalar field on the plane: z_1, z_2, <value_name>."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.asarray(values, dtype=float).ravel()
    if points.shape != (values.size, 2):
        raise ConfigurationError(
            f"field csv '{path}': points {points.shape} do not match {values.size} values"
        )
    write_csv(path, ["z_1", "z_2", value_name], np.column_stack([points, values]))


def write_audit_csv(path: str, report: AuditReport) -> None:
    """Serialize an audit: sample coordinates then the residual column."""
    k = report.points.shape[1]
    if k == 2:
        header = ["z_1", "z_2", "residual"]
    elif k == 1:
        header = ["step", "residual"]
    else:
        header = [f"x_{i + 1}" for i in range(k)] + ["residual"]
    write_csv(path, header, np.column_stack([report.points, report.residuals]))


def manifest_payload(config: dict, wall_time: float, **extras) -> dict:
    """Standard manifest body: config echo, versions, wall time, extras."""
    payload = {
        "config": dict(config),
        "versions": {
            "package": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "kernel_backend": backend_name(),
        },
        "wall_time_seconds": float(wall_time),
    }
    payload.update(extras)
    return payload


def write_manifest(path: str, payload: dict) -> None:
    """Write a JSON manifest (sorted keys, trailing newline) atomically."""
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
