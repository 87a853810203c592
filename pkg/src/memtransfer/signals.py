"""Uniform time grids and the sampled signals living on them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GridMismatchError(ValueError):
    """Signals that must share a time grid do not."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = t0 + k dt`` for ``k = 0 .. steps``."""

    t0: float
    t1: float
    steps: int

    def __post_init__(self):
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "t1", float(self.t1))
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))
        if not self.t0 < self.t1:
            raise ValueError(f"need t0 < t1, got [{self.t0}, {self.t1}]")

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.steps

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.steps + 1)

    def __len__(self) -> int:
        return self.steps + 1

    def index(self, t: float, atol: float = 1e-9) -> int:
        """Grid index of ``t``; raises ``ValueError`` if ``t`` is off-grid."""
        k = int(round((t - self.t0) / self.dt))
        if k < 0 or k > self.steps or abs(self.t0 + k * self.dt - t) > atol * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not a point of the grid {self}")
        return k

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.steps + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w

    def integrate(self, samples: np.ndarray) -> float:
        """Trapezoid rule over the whole grid (first axis)."""
        return np.tensordot(self.trapezoid_weights(), np.asarray(samples), axes=(0, 0))

    def cumulative_integral(self, samples: np.ndarray) -> np.ndarray:
        s = np.asarray(samples)
        out = np.zeros_like(s)
        out[1:] = np.cumsum(0.5 * self.dt * (s[1:] + s[:-1]), axis=0)
        return out


def _check_values(grid: TimeGrid, values: np.ndarray, what: str) -> None:
    if values.shape[0] != len(grid):
        raise GridMismatchError(
            f"{what} has {values.shape[0]} samples but the grid has {len(grid)} points"
        )
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what} contains non-finite samples")


@dataclass(frozen=True)
class PulseSignal:
    """Complex pulse shape sampled on a grid."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).copy()
        _check_values(self.grid, v, "pulse")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: TimeGrid, fn) -> "PulseSignal":
        return cls(grid, np.asarray(fn(grid.times), dtype=complex) * np.ones(len(grid)))

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "PulseSignal":
        return cls(grid, np.zeros(len(grid), dtype=complex))

    def norm_squared(self) -> float:
        """``int |xi|^2 dt`` by the trapezoid rule."""
        return float(self.grid.integrate(np.abs(self.values) ** 2))

    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def slope_sign_changes(self) -> np.ndarray:
        """Grid times where the discrete derivative of ``|xi|^2`` changes sign.

        The intensity is first averaged over one grid cell; flat stretches
        are skipped.  A unimodal pulse has exactly one such time, at its peak.
        """
        smooth = 0.5 * (self.intensity()[1:] + self.intensity()[:-1])
        d = np.diff(smooth)
        nz = np.flatnonzero(d)
        flips = nz[1:][np.sign(d[nz[1:]]) != np.sign(d[nz[:-1]])]
        # cell midpoints of the smoothed samples; the flip sits at sample flips
        return self.grid.times[flips] + 0.5 * self.grid.dt

    def is_unimodal(self) -> bool:
        return len(self.slope_sign_changes()) == 1


@dataclass(frozen=True)
class ControlSignal:
    """Real control sampled on a grid, piecewise linear between samples."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 0:
            v = np.full(len(self.grid), float(v))
        v = v.copy()
        _check_values(self.grid, v, "control")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: TimeGrid, value: float) -> "ControlSignal":
        return cls(grid, np.full(len(grid), float(value)))

    def midpoints(self) -> np.ndarray:
        v = self.values
        return 0.5 * (v[1:] + v[:-1])


@dataclass(frozen=True)
class Trajectory:
    """Complex state vectors, one per grid point (shape ``(steps+1, n)``)."""

    grid: TimeGrid
    states: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.states, dtype=complex)
        if s.ndim != 2 or s.shape[0] != len(self.grid):
            raise GridMismatchError(
                f"trajectory of shape {s.shape} does not fit a grid of {len(self.grid)} points"
            )
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    @property
    def initial(self) -> np.ndarray:
        return self.states[0]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def populations(self) -> np.ndarray:
        return np.abs(self.states) ** 2


@dataclass(frozen=True)
class CorrelationTrajectory:
    """Correlation matrices ``<N>(t_k)`` with shape ``(steps+1, n, n)``."""

    grid: TimeGrid
    matrices: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=complex)
        if m.ndim != 3 or m.shape[0] != len(self.grid):
            raise GridMismatchError("correlation matrices do not fit the grid")
        m.setflags(write=False)
        object.__setattr__(self, "matrices", m)

    def photon_numbers(self) -> np.ndarray:
        """Mean photon number of every mode, shape ``(steps+1, n)``."""
        return np.real(np.einsum("kii->ki", self.matrices))


def require_same_grid(*signals) -> TimeGrid:
    grid = signals[0].grid
    for s in signals[1:]:
        if s.grid != grid:
            raise GridMismatchError(f"grid mismatch: {grid} vs {s.grid}")
    return grid
