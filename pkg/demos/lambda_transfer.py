"""Optimal write-in to a Lambda memory.

Starts from a constant control, shapes the pulse toward a single peak at
t2 = -2.6, then checks where the photon ends up.  Takes about a minute.

    python3 demos/lambda_transfer.py
"""
import time

import numpy as np

from memtransfer import (
    ControlSignal,
    CostWeights,
    TerminalCondition,
    TimeGrid,
    build_zero_dynamics,
    lambda_system,
    optimize,
    propagate_eta,
)

sys = lambda_system()
zd = build_zero_dynamics(sys)
grid = TimeGrid(-20.0, 0.0, 2000)
term = TerminalCondition([1.0], grid.t1)
w = CostWeights(alpha=10.0, beta=1.0, gamma=1e4, delta=20.0, t2=-2.6)

start = time.perf_counter()
res = optimize(zd, term, w, ControlSignal.constant(grid, 1.0))
print(f"J: {res.cost_history[0]:.6g} -> {res.cost:.6g} in {res.iterations} iterations "
      f"({res.termination_reason}, {time.perf_counter() - start:.0f} s)")
print("residual |x(t0)|^2:", f"{np.sum(np.abs(res.x_traj.initial) ** 2):.1e}")

# %% the optimized pulse
I = res.xi_opt.intensity()
print(f"peak at t = {grid.times[np.argmax(I)]:.2f}", "| pulse norm", round(res.xi_opt.norm_squared(), 6))
# tiny ripples survive in the tail while the buffer rings down
for t in res.xi_opt.slope_sign_changes():
    print(f"  slope flips at t={t:7.2f}, |xi|^2 = {I[grid.index(round(t - grid.dt / 2, 6))]:.1e}")

# %% drive the memory with the pulse and the control
eta, out = propagate_eta(sys, res.u_opt, res.xi_opt)
print("final populations (buffer, buffer, memory):", np.round(np.abs(eta.final) ** 2, 6))
print("photons lost to the output:", f"{out.norm_squared():.1e}")

for t in range(-20, 1, 2):
    k = grid.index(float(t))
    print(f"t={t:>4}  u={res.u_opt.values[k]:7.3f}  |xi|^2={I[k]:.3e}")
