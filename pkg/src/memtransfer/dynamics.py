"""Forward simulation of pulse shapes, correlations and propagators.

All integrators here are the classical fixed-step RK4 rule.  Within a step
``[t_k, t_k+1]`` the control and the input pulse are evaluated at the two
grid points and at the midpoint.  Controls are piecewise linear.  Pulses use
four-point cubic interpolation between samples, so that the forcing term does
not cap the scheme at second order.

Pulse and correlation propagation split a grid step into equal substeps when
``dt |A(t)|`` exceeds ``MAX_STEP_NORM`` (large control values), so strongly
driven stretches keep the accuracy of the rest of the grid.
"""
from __future__ import annotations

import numpy as np

from .signals import (
    ControlSignal,
    CorrelationTrajectory,
    PulseSignal,
    TimeGrid,
    Trajectory,
    require_same_grid,
)
from .system import drift_parts


def drift_samples(sys, u: ControlSignal) -> tuple[np.ndarray, np.ndarray]:
    """Drift matrices at grid points and at step midpoints."""
    A_free, A_ctrl = drift_parts(sys)
    at_nodes = A_free + u.values[:, None, None] * A_ctrl
    at_mids = A_free + u.midpoints()[:, None, None] * A_ctrl
    return at_nodes, at_mids


def rk4_linear(y0, M_nodes, M_mids, h, b_nodes=None, b_mids=None):
    """Integrate ``y' = M(t) y + b(t)`` over every step of a uniform grid.

    ``M_nodes`` has one matrix per grid point and ``M_mids`` one per step.
    ``y0`` may be a vector or a matrix (columns are integrated independently).
    A negative ``h`` together with reversed sample arrays integrates backward.
    Returns the stacked states, first axis over grid points.
    """
    steps = M_mids.shape[0]
    y = np.array(y0, dtype=complex)
    out = np.empty((steps + 1,) + y.shape, dtype=complex)
    out[0] = y
    forced = b_nodes is not None
    for k in range(steps):
        Ma, Mm, Mb = M_nodes[k], M_mids[k], M_nodes[k + 1]
        k1 = Ma @ y
        if forced:
            k1 = k1 + b_nodes[k]
        k2 = Mm @ (y + 0.5 * h * k1)
        if forced:
            k2 = k2 + b_mids[k]
        k3 = Mm @ (y + 0.5 * h * k2)
        if forced:
            k3 = k3 + b_mids[k]
        k4 = Mb @ (y + h * k3)
        if forced:
            k4 = k4 + b_nodes[k + 1]
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = y
    return out


MAX_STEP_NORM = 0.05  # largest dt * |A| taken in a single RK4 step


def _cubic_weights(theta: float) -> np.ndarray:
    """Lagrange weights on nodes -1, 0, 1, 2 at position ``theta``."""
    t = theta
    return np.array([
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ])


def _pulse_at(v: np.ndarray, k: int, theta: float) -> complex:
    """Pulse at ``t_k + theta dt`` by four-point cubic interpolation."""
    n = len(v)
    if n < 4:
        return (1.0 - theta) * v[k] + theta * v[k + 1]
    if k == 0:  # one-sided stencils at both ends
        return _cubic_weights(theta - 1.0) @ v[:4]
    if k == n - 2:
        return _cubic_weights(theta + 1.0) @ v[-4:]
    return _cubic_weights(theta) @ v[k - 1:k + 3]


def _pulse_mids(xi: PulseSignal) -> np.ndarray:
    v = xi.values
    if len(v) < 4:
        return 0.5 * (v[1:] + v[:-1])
    mids = np.empty(len(v) - 1, dtype=complex)
    mids[1:-1] = (-v[:-3] + 9.0 * v[1:-2] + 9.0 * v[2:-1] - v[3:]) / 16.0
    mids[0] = (5.0 * v[0] + 15.0 * v[1] - 5.0 * v[2] + v[3]) / 16.0
    mids[-1] = (5.0 * v[-1] + 15.0 * v[-2] - 5.0 * v[-3] + v[-4]) / 16.0
    return mids


class _ForwardStepper:
    """RK4 substeps of ``eta' = A eta - C^H xi``, shared by pulse and correlation runs."""

    def __init__(self, sys, u: ControlSignal, xi: PulseSignal):
        self.grid = require_same_grid(u, xi)
        self.A_free, self.A_ctrl = drift_parts(sys)
        self.u, self.xi = u.values, xi.values
        self.Cc = np.asarray(sys.C).conj()
        self.nodes, self.mids = drift_samples(sys, u)
        self.xi_mids = _pulse_mids(xi)
        norms = np.linalg.norm(self.nodes, 2, axis=(1, 2)) * self.grid.dt
        worst = np.maximum(norms[1:], norms[:-1])
        self.substeps = np.maximum(1, np.ceil(worst / MAX_STEP_NORM)).astype(int)

    def _drift(self, k, theta):
        return self.A_free + (self.u[k] + theta * (self.u[k + 1] - self.u[k])) * self.A_ctrl

    def cell(self, k):
        """``(h, (A_a, A_m, A_b), (xi_a, xi_m, xi_b))`` for every substep of step ``k``."""
        h = self.grid.dt
        m = self.substeps[k]
        if m == 1:
            return [(h, (self.nodes[k], self.mids[k], self.nodes[k + 1]),
                     (self.xi[k], self.xi_mids[k], self.xi[k + 1]))]
        out = []
        for j in range(m):
            th = (j / m, (j + 0.5) / m, (j + 1) / m)
            out.append((h / m, tuple(self._drift(k, t) for t in th),
                        tuple(_pulse_at(self.xi, k, t) for t in th)))
        return out

    def stages(self, e, sub):
        """Stage points of one substep from ``e`` and the state after it."""
        h, (Aa, Am, Ab), (xa, xm, xb) = sub
        Cc = self.Cc
        k1 = Aa @ e - Cc * xa
        y2 = e + 0.5 * h * k1
        k2 = Am @ y2 - Cc * xm
        y3 = e + 0.5 * h * k2
        k3 = Am @ y3 - Cc * xm
        y4 = e + h * k3
        k4 = Ab @ y4 - Cc * xb
        return (e, y2, y3, y4), e + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _cumulative_quad4(f, h):
    """Cumulative integral of grid samples, fourth order in ``h``."""
    f = np.asarray(f)
    out = np.zeros(len(f), dtype=f.dtype)
    if len(f) < 4:
        out[1:] = np.cumsum(0.5 * h * (f[1:] + f[:-1]))
        return out
    cells = np.empty(len(f) - 1, dtype=f.dtype)
    cells[1:-1] = h / 24.0 * (-f[:-3] + 13.0 * f[1:-2] + 13.0 * f[2:-1] - f[3:])
    cells[0] = h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
    cells[-1] = h / 24.0 * (9.0 * f[-1] + 19.0 * f[-2] - 5.0 * f[-3] + f[-4])
    out[1:] = np.cumsum(cells)
    return out


def propagate_eta(sys, u: ControlSignal, xi: PulseSignal, eta0=None):
    """Pulse-shape dynamics ``eta' = A(t) eta - C^H xi``, ``xi_out = C eta + xi``.

    Parameters
    ----------
    sys : MemorySystem or PassiveLinearSystem
    u : ControlSignal
    xi : PulseSignal
        Input pulse on the same grid as ``u``.
    eta0 : array_like, optional
        State at ``t0``; the ground state (zeros) by default.

    Returns
    -------
    eta : Trajectory
    xi_out : PulseSignal
        Output pulse, with the phase produced by the dynamics as-is.
    """
    grid = require_same_grid(u, xi)
    n = sys.n
    eta0 = np.zeros(n, dtype=complex) if eta0 is None else np.asarray(eta0, dtype=complex)
    if eta0.shape != (n,):
        raise ValueError(f"eta0 must have shape ({n},), got {eta0.shape}")
    if not np.all(np.isfinite(eta0)):
        raise ValueError("eta0 contains non-finite entries")
    C = np.asarray(sys.C)
    stepper = _ForwardStepper(sys, u, xi)
    states = np.empty((len(grid), n), dtype=complex)
    states[0] = e = eta0
    for k in range(grid.steps):
        for sub in stepper.cell(k):
            _, e = stepper.stages(e, sub)
        states[k + 1] = e
    xi_out = states @ C + xi.values
    return Trajectory(grid, states), PulseSignal(grid, xi_out)


def _correlation_rhs(N, eta, xi_t, A, C):
    return (
        A.conj() @ N
        + N @ A.T
        - np.conj(xi_t) * np.outer(C, eta)
        - xi_t * np.outer(eta.conj(), C.conj())
    )


def propagate_correlation(sys, u: ControlSignal, xi: PulseSignal, eta: Trajectory):
    """Correlation-matrix dynamics for a single-photon input from the ground state.

    ``eta`` must be the trajectory returned by :func:`propagate_eta` for the
    same inputs.  The RK4 stage values of ``eta`` are rebuilt from its grid
    samples so both equations advance with a common stage sequence.  Each
    step is followed by Hermitian symmetrization.
    """
    grid = require_same_grid(u, xi, eta)
    C = np.asarray(sys.C)
    stepper = _ForwardStepper(sys, u, xi)
    n = sys.n
    N = np.zeros((n, n), dtype=complex)
    out = np.empty((len(grid), n, n), dtype=complex)
    out[0] = N
    for k in range(grid.steps):
        e = eta.states[k]
        for sub in stepper.cell(k):
            h, (Aa, Am, Ab), (xa, xm, xb) = sub
            ys, e = stepper.stages(e, sub)
            n1 = _correlation_rhs(N, ys[0], xa, Aa, C)
            n2 = _correlation_rhs(N + 0.5 * h * n1, ys[1], xm, Am, C)
            n3 = _correlation_rhs(N + 0.5 * h * n2, ys[2], xm, Am, C)
            n4 = _correlation_rhs(N + h * n3, ys[3], xb, Ab, C)
            N = N + (h / 6.0) * (n1 + 2.0 * n2 + 2.0 * n3 + n4)
        N = 0.5 * (N + N.conj().T)
        out[k + 1] = N
    return CorrelationTrajectory(grid, out)


def transition_matrix(sys, u: ControlSignal, ta: float, tb: float) -> np.ndarray:
    """Propagator ``Phi(tb, ta)`` of ``eta' = A(t) eta`` (time-ordered exponential).

    Both times must be grid points; ``tb < ta`` integrates backward.
    """
    grid = u.grid
    ka, kb = grid.index(ta), grid.index(tb)
    n = sys.n
    if ka == kb:
        return np.eye(n, dtype=complex)
    M_nodes, M_mids = drift_samples(sys, u)
    if kb > ka:
        nodes, mids, h = M_nodes[ka:kb + 1], M_mids[ka:kb], grid.dt
    else:
        nodes, mids, h = M_nodes[kb:ka + 1][::-1], M_mids[kb:ka][::-1], -grid.dt
    return rk4_linear(np.eye(n, dtype=complex), nodes, mids, h)[-1]


def photon_balance_defect(eta: Trajectory, xi: PulseSignal, xi_out: PulseSignal) -> np.ndarray:
    """``|eta(t)|^2 - |eta(t0)|^2 - int (|xi|^2 - |xi_out|^2)`` on the grid.

    Vanishes for exact dynamics because ``A + A^H = -C^H C``.
    """
    grid = eta.grid
    norm2 = np.sum(np.abs(eta.states) ** 2, axis=1)
    flux = _cumulative_quad4(np.abs(xi.values) ** 2 - np.abs(xi_out.values) ** 2, grid.dt)
    return norm2 - norm2[0] - flux
