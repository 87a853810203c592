"""Absorbing a photon with a constant control.

A bare cavity swallows a rising exponential perfectly.  For a Lambda memory
with the control held fixed, the matching input pulse follows from the zero
dynamics, both by integration and in closed form.  Run with

    python3 demos/rising_exponential.py
"""
import numpy as np

from memtransfer import (
    ControlSignal,
    PassiveLinearSystem,
    PulseSignal,
    TerminalCondition,
    TimeGrid,
    build_zero_dynamics,
    lambda_system,
    propagate_eta,
    rising_exponential,
    solve_backward,
)
from memtransfer.zero_dynamics import drift_eigenvalues

grid = TimeGrid(-20.0, 0.0, 2000)
off = ControlSignal.constant(grid, 0.0)

# %% one cavity mode, decay rate 1, fed exp(t/2)
cavity = PassiveLinearSystem([[0.0]], [[0.0]], [1.0])
xi = PulseSignal(grid, np.exp(grid.times / 2))
eta, out = propagate_eta(cavity, off, xi)
print("cavity: stored photon number", round(abs(eta.final[0]) ** 2, 6),
      "| largest reflected amplitude", f"{np.max(np.abs(out.values)):.1e}")

# %% Lambda memory with u = 1: the drift spectrum fixes the pulse shape
lam = lambda_system()
print("Heisenberg drift eigenvalues at u = 1:", np.round(drift_eigenvalues(lam, 1.0), 4))

on = ControlSignal.constant(grid, 1.0)
closed = rising_exponential(lam, 1.0, [0, 0, 1], grid)
x = solve_backward(build_zero_dynamics(lam), on, TerminalCondition([1.0], grid.t1))
gap = np.max(np.abs(closed.values - x.states[:, 0])) / np.max(np.abs(closed.values))
print(f"closed form vs integrated zero dynamics: relative gap {gap:.1e}")

# %% the window opens at t = -20 and cuts off a sliver of the slow tail,
# so the pulse carries slightly less than one photon and the memory fills to match
print("pulse norm", round(closed.norm_squared(), 6))
eta, _ = propagate_eta(lam, on, closed)
print("final populations (buffer, buffer, memory):", np.round(np.abs(eta.final) ** 2, 6))

# %% coarse picture of |xi|^2 near the end of the window
for t in (-8, -6, -4, -3, -2, -1, 0):
    k = grid.index(float(t))
    bar = "#" * int(60 * closed.intensity()[k] / closed.intensity().max())
    print(f"t={t:>3}  {bar}")
