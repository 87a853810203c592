"""Zero-output dynamics of a memory system.

Imposing a vanishing output field, ``c eta0 + xi = 0``, turns the pulse
dynamics into the bilinear system ``x' = (A0 + A1 u) x`` for
``x = [xi, eta1, eta2]``.  Fixing ``x(t1) = [0, 0, eta2(t1)]`` and a control
determines the unique input pulse that is absorbed without reflection.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .signals import ControlSignal, PulseSignal, TimeGrid, Trajectory
from .system import InvariantError, MemorySystem, assemble_heisenberg_drift


class UnstableDriftWarning(RuntimeWarning):
    """The drift has an eigenvalue with nonnegative real part."""


@dataclass(frozen=True)
class ZeroDynamics:
    A0: np.ndarray
    A1: np.ndarray
    sys: MemorySystem

    @property
    def n(self) -> int:
        return self.A0.shape[0]

    def matrix(self, u: float) -> np.ndarray:
        return self.A0 + float(u) * self.A1


@dataclass(frozen=True)
class TerminalCondition:
    """Memory-mode amplitudes ``eta2`` reached at time ``t1``."""

    eta2_final: np.ndarray
    t1: float

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.eta2_final, dtype=complex))
        v.setflags(write=False)
        object.__setattr__(self, "eta2_final", v)
        object.__setattr__(self, "t1", float(self.t1))

    @classmethod
    def from_full_target(cls, sys: MemorySystem, target, t1: float) -> "TerminalCondition":
        """Build from a full ``n``-vector target; buffer entries must vanish."""
        target = np.asarray(target, dtype=complex)
        if target.shape != (sys.n,):
            raise ValueError(f"target must have {sys.n} entries")
        if np.any(target[sys.dims.buffer] != 0):
            raise ValueError("target must be supported on the memory modes only")
        return cls(target[sys.dims.memory], t1)

    def state(self, n: int) -> np.ndarray:
        """Full terminal vector ``[0, 0, eta2]`` of length ``n``."""
        x = np.zeros(n, dtype=complex)
        x[n - self.eta2_final.size:] = self.eta2_final
        return x


def build_zero_dynamics(sys: MemorySystem) -> ZeroDynamics:
    """Assemble ``(A0, A1)`` from the blocks of ``sys``."""
    c = sys.c
    if c == 0:
        raise InvariantError("zero dynamics need c != 0")
    n1 = sys.dims.n1
    n = sys.n
    b = slice(1, 1 + n1)
    m = sys.dims.memory
    A0 = np.zeros((n, n), dtype=complex)
    A0[0, 0] = 0.5 * abs(c) ** 2 - 1j * sys.F00
    A0[0, b] = 1j * c * sys.F01
    A0[b, 0] = 1j * sys.F01.conj() / c
    A0[b, b] = -1j * sys.F11
    A1 = np.zeros((n, n), dtype=complex)
    A1[b, b] = -1j * sys.G11
    A1[b, m] = -1j * sys.G12
    A1[m, b] = -1j * sys.G12.conj().T
    A1[m, m] = -1j * sys.G22
    for a in (A0, A1):
        a.setflags(write=False)
    return ZeroDynamics(A0, A1, sys)


def backward_step_matrices(zd: ZeroDynamics, u: ControlSignal) -> np.ndarray:
    """RK4 one-step maps ``P_k`` with ``x(t_k) = P_k x(t_k+1)``.

    The step runs in reversed time ``tau = t1 - t`` with drift
    ``-(A0 + A1 u)``; the control is taken at ``t_k+1``, the midpoint
    (linear interpolation) and ``t_k``.
    """
    h = u.grid.dt
    nodes = -(zd.A0 + u.values[:, None, None] * zd.A1)
    mids = -(zd.A0 + u.midpoints()[:, None, None] * zd.A1)
    Ba, Bm, Bb = nodes[1:], mids, nodes[:-1]
    eye = np.eye(zd.n)
    S1 = Ba
    S2 = Bm @ (eye + 0.5 * h * S1)
    S3 = Bm @ (eye + 0.5 * h * S2)
    S4 = Bb @ (eye + h * S3)
    return eye + (h / 6.0) * (S1 + 2.0 * S2 + 2.0 * S3 + S4)


def _sweep_backward(P: np.ndarray, x_final: np.ndarray) -> np.ndarray:
    steps, n, _ = P.shape
    out = np.empty((steps + 1, n), dtype=complex)
    x = x_final
    out[steps] = x
    for k in range(steps - 1, -1, -1):
        x = P[k] @ x
        out[k] = x
    return out


def _check_terminal(term: TerminalCondition, grid: TimeGrid, zd: ZeroDynamics) -> None:
    if abs(term.t1 - grid.t1) > 1e-9 * max(1.0, abs(grid.t1)):
        raise ValueError(f"terminal time {term.t1} does not match grid end {grid.t1}")
    if term.eta2_final.size != zd.sys.dims.n2:
        raise ValueError(f"terminal condition needs {zd.sys.dims.n2} memory amplitudes")


def solve_backward(zd: ZeroDynamics, u: ControlSignal, term: TerminalCondition,
                   grid: TimeGrid | None = None) -> Trajectory:
    """Integrate the zero dynamics from ``x(t1)`` back to ``t0``.

    The first component of the returned states is the input pulse that
    keeps the output field at zero under the control ``u``.
    """
    if grid is not None and grid != u.grid:
        raise ValueError("control is not sampled on the requested grid")
    grid = u.grid
    _check_terminal(term, grid, zd)
    P = backward_step_matrices(zd, u)
    return Trajectory(grid, _sweep_backward(P, term.state(zd.n)))


def real_split_drift(zd: ZeroDynamics, u: float) -> np.ndarray:
    """Real ``2n x 2n`` reversed-time drift acting on ``[x_R; x_I]``."""
    A0R, A0I = zd.A0.real, zd.A0.imag
    A1R, A1I = zd.A1.real, zd.A1.imag
    MR = -A0R - A1R * u
    MI = A0I + A1I * u
    return np.block([[MR, MI], [-MI, MR]])


def solve_backward_real(zd: ZeroDynamics, u: ControlSignal, term: TerminalCondition) -> Trajectory:
    """Same as :func:`solve_backward`, on the real ``2n``-dimensional form.

    Kept as an independent stage-by-stage RK4 over real vectors.
    """
    grid = u.grid
    _check_terminal(term, grid, zd)
    n = zd.n
    h = grid.dt
    x_end = term.state(n)
    y = np.concatenate([x_end.real, x_end.imag])
    out = np.empty((len(grid), 2 * n))
    out[-1] = y
    uv = u.values
    for k in range(grid.steps - 1, -1, -1):
        Ma = real_split_drift(zd, uv[k + 1])
        Mm = real_split_drift(zd, 0.5 * (uv[k] + uv[k + 1]))
        Mb = real_split_drift(zd, uv[k])
        k1 = Ma @ y
        k2 = Mm @ (y + 0.5 * h * k1)
        k3 = Mm @ (y + 0.5 * h * k2)
        k4 = Mb @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k] = y
    return Trajectory(grid, out[:, :n] + 1j * out[:, n:])


def pulse_from_trajectory(x: Trajectory) -> PulseSignal:
    return PulseSignal(x.grid, x.states[:, 0])


def eta_from_trajectory(zd: ZeroDynamics, x: Trajectory) -> np.ndarray:
    """Pulse-dynamics state ``[-xi/c, eta1, eta2]`` along a zero-dynamics run."""
    eta = np.array(x.states)
    eta[:, 0] = -eta[:, 0] / zd.sys.c
    return eta


def drift_eigenvalues(sys, u: float) -> np.ndarray:
    return np.linalg.eigvals(assemble_heisenberg_drift(sys, u))


def rising_exponential(sys, u_const: float, eta_final, grid: TimeGrid,
                       t1: float | None = None) -> PulseSignal:
    """Closed-form perfectly absorbed pulse for a constant control.

    ``xi(t) = -eta(t1)^T exp(A^*(t1 - t)) C^T`` for ``t <= t1`` and zero
    afterwards, with ``A`` the drift at ``u_const``.  Warns with
    :class:`UnstableDriftWarning` when some eigenvalue of ``A`` has a
    nonnegative real part, in which case perfect transfer is unattainable.
    """
    t1 = grid.t1 if t1 is None else float(t1)
    A = assemble_heisenberg_drift(sys, u_const)
    lam = np.linalg.eigvals(A)
    if np.any(lam.real >= 0):
        warnings.warn(
            f"drift eigenvalues {lam} have nonnegative real parts; "
            "the pulse cannot be perfectly absorbed",
            UnstableDriftWarning,
            stacklevel=2,
        )
    eta_final = np.atleast_1d(np.asarray(eta_final, dtype=complex))
    C = np.asarray(sys.C)
    lag = t1 - grid.times
    active = lag >= 0
    props = expm(A.conj()[None] * lag[active, None, None])
    xi = np.zeros(len(grid), dtype=complex)
    xi[active] = -np.einsum("i,kij,j->k", eta_final, props, C)
    return PulseSignal(grid, xi)
