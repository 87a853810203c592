"""CSV and JSON readers/writers for signals, trajectories and results.

CSV files are UTF-8, comma separated, with a header row; numbers are
printed with 15 significant digits.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .signals import (
    ControlSignal,
    CorrelationTrajectory,
    PulseSignal,
    TimeGrid,
    Trajectory,
)

FMT = "%.15g"


def _write(path, header, columns) -> Path:
    path = Path(path)
    data = np.column_stack(columns)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in data:
            writer.writerow([FMT % v for v in row])
    return path


def _read(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV file")
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body], dtype=float)
    if data.size and data.shape[1] != len(header):
        raise ValueError(f"{path}: rows do not match the header")
    return header, data.reshape(len(body), len(header))


def grid_from_times(t: np.ndarray, rtol: float = 1e-9) -> TimeGrid:
    """Recover a uniform grid from its sample times."""
    if t.size < 2:
        raise ValueError("need at least two samples to define a grid")
    grid = TimeGrid(t[0], t[-1], t.size - 1)
    if np.max(np.abs(grid.times - t)) > rtol * max(1.0, np.max(np.abs(t))) + 1e-12:
        raise ValueError("sample times are not uniformly spaced")
    return grid


def write_pulse(path, pulse: PulseSignal) -> Path:
    v = pulse.values
    return _write(path, ["t", "re", "im"], [pulse.grid.times, v.real, v.imag])


def read_pulse(path, grid: TimeGrid | None = None) -> PulseSignal:
    header, data = _read(path)
    if header != ["t", "re", "im"]:
        raise ValueError(f"{path}: expected columns t,re,im, got {header}")
    g = grid_from_times(data[:, 0])
    if grid is not None and g != grid:
        raise ValueError(f"{path}: pulse grid {g} differs from {grid}")
    return PulseSignal(grid or g, data[:, 1] + 1j * data[:, 2])


def write_control(path, u: ControlSignal) -> Path:
    return _write(path, ["t", "u"], [u.grid.times, u.values])


def read_control(path, grid: TimeGrid | None = None) -> ControlSignal:
    header, data = _read(path)
    if header != ["t", "u"]:
        raise ValueError(f"{path}: expected columns t,u, got {header}")
    g = grid_from_times(data[:, 0])
    if grid is not None and g != grid:
        raise ValueError(f"{path}: control grid {g} differs from {grid}")
    return ControlSignal(grid or g, data[:, 1])


def write_trajectory(path, traj: Trajectory) -> Path:
    n = traj.states.shape[1]
    header = ["t"]
    cols = [traj.grid.times]
    for i in range(n):
        header += [f"re_{i}", f"im_{i}"]
        cols += [traj.states[:, i].real, traj.states[:, i].imag]
    return _write(path, header, cols)


def read_trajectory(path) -> Trajectory:
    header, data = _read(path)
    n = (len(header) - 1) // 2
    expected = ["t"] + [f"{p}_{i}" for i in range(n) for p in ("re", "im")]
    if header != expected:
        raise ValueError(f"{path}: unexpected trajectory header {header}")
    grid = grid_from_times(data[:, 0])
    return Trajectory(grid, data[:, 1::2] + 1j * data[:, 2::2])


def write_photon_numbers(path, corr: CorrelationTrajectory) -> Path:
    N = corr.photon_numbers()
    header = ["t"] + [f"N_{i}{i}" for i in range(N.shape[1])]
    return _write(path, header, [corr.grid.times] + [N[:, i] for i in range(N.shape[1])])


def read_photon_numbers(path) -> tuple[TimeGrid, np.ndarray]:
    header, data = _read(path)
    if header[0] != "t" or not all(h.startswith("N_") for h in header[1:]):
        raise ValueError(f"{path}: unexpected photon-number header {header}")
    return grid_from_times(data[:, 0]), data[:, 1:]


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, default=_json_default) + "\n", encoding="utf-8")
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, (complex, np.complexfloating)):
        return [float(np.real(o)), float(np.imag(o))]
    if isinstance(o, np.ndarray):
        if np.iscomplexobj(o):
            return np.stack([o.real, o.imag], axis=-1).tolist()
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")
