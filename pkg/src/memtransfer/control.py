"""Optimal control of the zero dynamics toward a unimodal input pulse.

The cost of a control ``u`` on ``[t0, t1]`` is::

    J[u] = int [alpha exp(h(t) d|xi|^2/dt) + beta u^2] dt + gamma |x(t0)|^2

where ``x`` solves the zero dynamics backward from the memory target and
``h`` is ``-delta`` before the pulse extremum ``t2`` and ``+delta`` after.
``d|xi|^2/dt`` is evaluated by substituting the dynamics for ``xi'``.

Two gradients are provided.  :func:`solve_adjoint` and :func:`gradient`
integrate the continuous Euler-Lagrange costate with RK4.
:func:`cost_and_gradient` is the exact gradient of the discretized cost
(trapezoid quadrature of the RK4 solution), propagated by the discrete
adjoint recursion; the optimizer uses this one so that every line search
sees consistent values and slopes.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .linesearch import wolfe_search
from .signals import ControlSignal, PulseSignal, TimeGrid, Trajectory
from .zero_dynamics import (
    TerminalCondition,
    ZeroDynamics,
    _check_terminal,
    _sweep_backward,
    backward_step_matrices,
    real_split_drift,
    solve_backward,
)

log = logging.getLogger(__name__)

EXP_CLAMP = 700.0


@dataclass(frozen=True)
class CostWeights:
    alpha: float
    beta: float
    gamma: float
    delta: float
    t2: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"weight {name} must be nonnegative")

    def check_window(self, grid: TimeGrid) -> None:
        if not grid.t0 < self.t2 < grid.t1:
            raise ValueError(f"t2={self.t2} must lie strictly inside ({grid.t0}, {grid.t1})")


@dataclass(frozen=True)
class RealState:
    """Real and imaginary parts of a complex state."""

    xr: np.ndarray
    xi: np.ndarray

    @classmethod
    def from_complex(cls, x) -> "RealState":
        x = np.asarray(x, dtype=complex)
        return cls(x.real.copy(), x.imag.copy())

    def to_complex(self) -> np.ndarray:
        return self.xr + 1j * self.xi

    def vector(self) -> np.ndarray:
        return np.concatenate([self.xr, self.xi])


@dataclass(frozen=True)
class AdjointTrajectory:
    grid: TimeGrid
    p: np.ndarray  # shape (steps+1, 2n)


@dataclass
class OptimizationResult:
    u_opt: ControlSignal
    xi_opt: PulseSignal
    x_traj: Trajectory
    cost_history: list
    grad_norm_history: list
    t2_used: float
    termination_reason: str
    iterations: int = 0
    candidate_costs: dict = field(default_factory=dict)

    @property
    def cost(self) -> float:
        return self.cost_history[-1]

    def to_dict(self) -> dict:
        return {
            "cost": self.cost,
            "iterations": self.iterations,
            "t2_used": self.t2_used,
            "termination_reason": self.termination_reason,
            "initial_state_norm2": float(np.sum(np.abs(self.x_traj.initial) ** 2)),
            "pulse_norm2": self.xi_opt.norm_squared(),
            "cost_history": [float(c) for c in self.cost_history],
            "grad_norm_history": [float(g) for g in self.grad_norm_history],
            "candidate_costs": {repr(float(k)): float(v) for k, v in self.candidate_costs.items()},
        }


def step_weight(t, w: CostWeights, t0: float | None = None, t1: float | None = None):
    """``-delta`` for ``t < t2`` and ``+delta`` from ``t2`` on."""
    t_arr = np.asarray(t, dtype=float)
    if (t0 is not None and np.any(t_arr < t0)) or (t1 is not None and np.any(t_arr > t1)):
        raise ValueError(f"time {t} lies outside the window [{t0}, {t1}]")
    out = np.where(t_arr < w.t2, -w.delta, w.delta)
    return float(out) if out.ndim == 0 else out


def _clamped_exp(arg):
    arg = np.asarray(arg, dtype=float)
    clamped = arg > EXP_CLAMP
    return np.exp(np.minimum(arg, EXP_CLAMP)), clamped


def _intensity_rate(zd: ZeroDynamics, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``d|xi|^2/dt`` for states ``x`` (last axis), and ``xi'`` itself."""
    # A1 has a zero first row, so xi' does not depend on u
    xi_dot = x @ zd.A0[0]
    return 2.0 * np.real(np.conj(x[..., 0]) * xi_dot), xi_dot


def running_cost(x, u: float, t: float, zd: ZeroDynamics, w: CostWeights) -> float:
    """Integrand ``alpha exp(2 h (xiR xiR' + xiI xiI')) + beta u^2``."""
    if isinstance(x, RealState):
        x = x.to_complex()
    rate, _ = _intensity_rate(zd, np.asarray(x, dtype=complex))
    e, clamped = _clamped_exp(step_weight(t, w) * rate)
    if clamped:
        log.warning("exp argument clamped at %g at t=%g", EXP_CLAMP, t)
    return float(w.alpha * e + w.beta * float(u) ** 2)


class _CellQuadrature:
    """Trapezoid quadrature of the running cost, one cell at a time.

    ``h`` is taken at each cell's midpoint, so the jump at ``t2`` is resolved
    exactly when ``t2`` is a grid point.  Every node therefore carries a left
    and a right half-weight with possibly different ``h``.
    """

    def __init__(self, zd, states, u_values, grid: TimeGrid, w: CostWeights):
        rate, _ = _intensity_rate(zd, states)
        t, dt = grid.times, grid.dt
        self.h = (step_weight(t - 0.5 * dt, w), step_weight(t + 0.5 * dt, w))
        half = np.full(len(grid), 0.5 * dt)
        self.wts = (half.copy(), half.copy())
        self.wts[0][0] = 0.0
        self.wts[1][-1] = 0.0
        self.e, self.clamped = [], []
        for hk in self.h:
            e, c = _clamped_exp(hk * rate)
            self.e.append(e)
            self.clamped.append(c)
        self.value = float(
            sum(wt @ (w.alpha * e) for wt, e in zip(self.wts, self.e))
            + grid.trapezoid_weights() @ (w.beta * u_values ** 2)
        )

    @property
    def any_clamped(self) -> bool:
        return bool(np.any(self.clamped[0] | self.clamped[1]))

    def state_grad(self, zd, states, w) -> np.ndarray:
        """Per-node gradient of the quadrature w.r.t. ``x`` (``dR + i dI``)."""
        return sum(wt[:, None] * _running_cost_grad(zd, states, e, hk, c, w)
                   for wt, e, hk, c in zip(self.wts, self.e, self.h, self.clamped))


def total_cost(u: ControlSignal, zd: ZeroDynamics, term: TerminalCondition, w: CostWeights) -> float:
    x = solve_backward(zd, u, term)
    quad = _CellQuadrature(zd, x.states, u.values, u.grid, w)
    return quad.value + float(w.gamma * np.sum(np.abs(x.initial) ** 2))


def _running_cost_grad(zd, states, e, hk, clamped, w) -> np.ndarray:
    """Gradient of the running cost w.r.t. ``x`` as ``dL/dxR + i dL/dxI``."""
    a0 = zd.A0[0]
    s = states @ a0
    gq = 2.0 * states[:, :1] * a0.conj()[None, :]
    gq[:, 0] += 2.0 * s
    scale = np.where(clamped, 0.0, w.alpha * hk * e)
    return scale[:, None] * gq


def hamilton_function(x, u: float, p, t: float, zd: ZeroDynamics, w: CostWeights) -> float:
    """``H = L(x, u, t) + p^T f(x, u)`` with ``f`` the reversed-time real drift."""
    if not isinstance(x, RealState):
        x = RealState.from_complex(x)
    return running_cost(x, u, t, zd, w) + float(np.dot(p, real_split_drift(zd, u) @ x.vector()))


def _hermite_midpoints(zd, x: Trajectory, u: ControlSignal) -> np.ndarray:
    """Cubic Hermite interpolation of the state at step midpoints."""
    s = x.states
    h = x.grid.dt
    xdot = np.einsum("kij,kj->ki", zd.A0[None] + u.values[:, None, None] * zd.A1, s)
    return 0.5 * (s[1:] + s[:-1]) + (h / 8.0) * (xdot[:-1] - xdot[1:])


def _to_real(v: np.ndarray) -> np.ndarray:
    return np.concatenate([v.real, v.imag], axis=-1)


def solve_adjoint(u: ControlSignal, x_traj: Trajectory, zd: ZeroDynamics,
                  w: CostWeights) -> AdjointTrajectory:
    """Continuous costate, integrated forward from ``p(t0) = 2 gamma [xR; xI](t0)``.

    In reversed time the costate obeys ``dp/dtau = -(dH/dx)^T``, i.e.
    ``dp/dt = (dH/dx)^T = grad L + F^T p`` with ``F`` the real drift of
    :func:`~memtransfer.zero_dynamics.real_split_drift`.
    """
    grid = x_traj.grid
    if u.grid != grid:
        raise ValueError("control and state trajectory are on different grids")
    h = grid.dt
    times = grid.times
    mids_t = times[:-1] + 0.5 * h
    x_mid = _hermite_midpoints(zd, x_traj, u)
    u_mid = u.midpoints()

    # h is held at its cell value over each step, so all stages see one side of t2
    h_cell = step_weight(mids_t, w)

    def forcing(states):
        rate, _ = _intensity_rate(zd, states)
        e, clamped = _clamped_exp(h_cell * rate)
        return _to_real(_running_cost_grad(zd, states, e, h_cell, clamped, w))

    g_start = forcing(x_traj.states[:-1])
    g_end = forcing(x_traj.states[1:])
    g_mids = forcing(x_mid)
    FT_nodes = np.array([real_split_drift(zd, v).T for v in u.values])
    FT_mids = np.array([real_split_drift(zd, v).T for v in u_mid])
    p = 2.0 * w.gamma * _to_real(x_traj.initial)
    out = np.empty((len(grid), p.size))
    out[0] = p
    for k in range(grid.steps):
        k1 = FT_nodes[k] @ p + g_start[k]
        k2 = FT_mids[k] @ (p + 0.5 * h * k1) + g_mids[k]
        k3 = FT_mids[k] @ (p + 0.5 * h * k2) + g_mids[k]
        k4 = FT_nodes[k + 1] @ (p + h * k3) + g_end[k]
        p = p + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = p
    return AdjointTrajectory(grid, out)


def gradient(u: ControlSignal, x_traj: Trajectory, p_traj: AdjointTrajectory,
             zd: ZeroDynamics, w: CostWeights) -> np.ndarray:
    """Pointwise ``dH/du = 2 beta u + p^T (dF/du) x`` on the grid.

    The running cost depends on ``u`` only through ``beta u^2`` because the
    control never enters the pulse row of the zero dynamics.
    """
    dF = np.block([[-zd.A1.real, zd.A1.imag], [-zd.A1.imag, -zd.A1.real]])
    xv = _to_real(x_traj.states)
    return 2.0 * w.beta * u.values + np.einsum("ki,ij,kj->k", p_traj.p, dF, xv)


class _Evaluation:
    """Discretized cost at one control, with lazy exact gradient."""

    def __init__(self, u: np.ndarray, zd, term, w, grid):
        self.u = u
        self.zd, self.w, self.grid = zd, w, grid
        self.control = ControlSignal(grid, u)
        self.P = backward_step_matrices(zd, self.control)
        self.states = _sweep_backward(self.P, term.state(zd.n))
        self.weights = grid.trapezoid_weights()
        self.quad = _CellQuadrature(zd, self.states, u, grid, w)
        self.cost = self.quad.value + float(w.gamma * np.sum(np.abs(self.states[0]) ** 2))
        self._grad = None

    @property
    def any_clamped(self) -> bool:
        return self.quad.any_clamped

    def grad_components(self) -> np.ndarray:
        """``dJ/du_k`` for every grid sample (not divided by quadrature weights)."""
        if self._grad is None:
            self._grad = self._compute_grad()
        return self._grad

    def grad_density(self) -> np.ndarray:
        """Gradient as a function of time: ``dJ/du_k / w_k``."""
        return self.grad_components() / self.weights

    def _compute_grad(self) -> np.ndarray:
        zd, w, grid = self.zd, self.w, self.grid
        X = self.states
        wts = self.weights
        direct = self.quad.state_grad(zd, X, w)
        direct[0] += 2.0 * w.gamma * X[0]
        # costates: lam_k = dJ/dx_k (total), x_k = P_k x_{k+1}
        PH = np.conj(np.swapaxes(self.P, 1, 2))
        lam = np.empty_like(X)
        lam[0] = direct[0]
        for k in range(grid.steps):
            lam[k + 1] = direct[k + 1] + PH[k] @ lam[k]
        self.costates = lam

        h = grid.dt
        u = self.u
        um = 0.5 * (u[1:] + u[:-1])
        D = -zd.A1
        Ba = -(zd.A0 + u[1:, None, None] * zd.A1)
        Bm = -(zd.A0 + um[:, None, None] * zd.A1)
        Bb = -(zd.A0 + u[:-1, None, None] * zd.A1)

        def mv(M, v):
            return np.einsum("kij,kj->ki", M, v) if M.ndim == 3 else v @ M.T

        y = X[1:]
        k1 = mv(Ba, y)
        z2 = y + 0.5 * h * k1
        k2 = mv(Bm, z2)
        z3 = y + 0.5 * h * k2
        k3 = mv(Bm, z3)
        z4 = y + h * k3

        # derivative of the step map w.r.t. u at the step's later node
        d1 = mv(D, y)
        d2 = mv(Bm, 0.5 * h * d1)
        d3 = mv(Bm, 0.5 * h * d2)
        d4 = mv(Bb, h * d3)
        dx_a = (h / 6.0) * (d1 + 2 * d2 + 2 * d3 + d4)
        # ... at the midpoint
        m2 = mv(D, z2)
        m3 = mv(D, z3) + mv(Bm, 0.5 * h * m2)
        m4 = mv(Bb, h * m3)
        dx_m = (h / 6.0) * (2 * m2 + 2 * m3 + m4)
        # ... at the earlier node
        dx_b = (h / 6.0) * mv(D, z4)

        lk = lam[:-1]

        def proj(v):
            return np.real(np.sum(np.conj(lk) * v, axis=1))

        pa, pm, pb = proj(dx_a), proj(dx_m), proj(dx_b)
        g = 2.0 * w.beta * u * wts
        g[:-1] += pb + 0.5 * pm
        g[1:] += pa + 0.5 * pm
        return g


def cost_and_gradient(u: ControlSignal, zd: ZeroDynamics, term: TerminalCondition,
                      w: CostWeights) -> tuple[float, np.ndarray]:
    """Discretized cost and its exact gradient density ``dJ/du_k / w_k``."""
    _check_terminal(term, u.grid, zd)
    ev = _Evaluation(np.asarray(u.values, dtype=float), zd, term, w, u.grid)
    return ev.cost, ev.grad_density()


@dataclass(frozen=True)
class OptimizerOptions:
    tol: float | None = None  # default: 1e-6 * J[u_init]
    max_iters: int = 5000
    mu1: float = 1e-4
    mu2: float = 0.9
    max_trials: int = 50
    initial_step: float | None = None  # first trial step; 1/|grad| by default
    log_every: int = 0


def optimize(zd: ZeroDynamics, term: TerminalCondition, w: CostWeights,
             u_init: ControlSignal, opts: OptimizerOptions | None = None,
             callback=None) -> OptimizationResult:
    """Steepest descent on ``J[u]`` with a weak-Wolfe line search.

    The descent direction is ``s = -dH/du`` sampled on the grid.  Stops when
    ``(int |dH/du|^2 dt)^(1/2) <= tol``, after ``max_iters`` accepted steps,
    or when a line search exhausts its trial budget.
    """
    opts = opts or OptimizerOptions()
    grid = u_init.grid
    w.check_window(grid)
    _check_terminal(term, grid, zd)
    wts = grid.trapezoid_weights()

    def evaluate(u):
        # overshooting trials may overflow; they are rejected as non-finite
        with np.errstate(over="ignore", invalid="ignore"):
            return _Evaluation(u, zd, term, w, grid)

    cur = evaluate(np.array(u_init.values, dtype=float))
    if not np.isfinite(cur.cost):
        raise FloatingPointError("initial control gives a non-finite cost")
    tol = opts.tol if opts.tol is not None else 1e-6 * cur.cost
    g = cur.grad_density()
    gnorm = float(np.sqrt(wts @ g ** 2))
    costs, gnorms = [cur.cost], [gnorm]
    step = opts.initial_step if opts.initial_step is not None else 1.0 / max(gnorm, 1e-300)
    prev_slope, prev = None, None
    reason = "max-iters"
    it = 0
    while it < opts.max_iters:
        if gnorm <= tol:
            reason = "gradient-small"
            break
        s = -g
        slope0 = float(wts @ (g * s))
        if prev is not None:
            # Barzilai-Borwein estimate as the first trial, else rescale the last step
            du, dg = cur.u - prev[0], g - prev[1]
            curv = float(wts @ (du * dg))
            bb = float(wts @ (du * du)) / curv if curv > 0 else np.inf
            guess = 2.0 * step * prev_slope / slope0 if slope0 else step
            step = bb if np.isfinite(bb) else min(guess, 1e3 * step)
        base = cur.u
        trials = {}

        def phi(eps, need_slope, _s=s, _base=base, _trials=trials):
            ev = _trials.get(eps)
            if ev is None:
                ev = _trials[eps] = evaluate(_base + eps * _s)
            value = ev.cost if not ev.any_clamped else np.inf
            slope = None
            if need_slope:
                with np.errstate(over="ignore", invalid="ignore"):
                    slope = float(ev.grad_components() @ _s)
            return value, slope, ev

        res = wolfe_search(phi, cur.cost, slope0, step, mu1=opts.mu1, mu2=opts.mu2,
                           max_trials=opts.max_trials)
        if not res.success:
            reason = "line-search-failed"
            break
        it += 1
        step, prev_slope = res.step, slope0
        prev = (cur.u, g)
        cur = res.payload
        g = cur.grad_density()
        gnorm = float(np.sqrt(wts @ g ** 2))
        costs.append(cur.cost)
        gnorms.append(gnorm)
        if opts.log_every and it % opts.log_every == 0:
            log.info("iter %d  J=%.10g  |grad|=%.4g  step=%.3g", it, cur.cost, gnorm, step)
        if callback is not None:
            callback(it, cur.cost, gnorm)
    else:
        if gnorm <= tol:
            reason = "gradient-small"

    x = Trajectory(grid, cur.states)
    return OptimizationResult(
        u_opt=ControlSignal(grid, cur.u),
        xi_opt=PulseSignal(grid, cur.states[:, 0]),
        x_traj=x,
        cost_history=costs,
        grad_norm_history=gnorms,
        t2_used=w.t2,
        termination_reason=reason,
        iterations=it,
    )


def default_t2_candidates(grid: TimeGrid, count: int = 8) -> np.ndarray:
    span = grid.t1 - grid.t0
    return np.linspace(grid.t0 + 0.1 * span, grid.t1 - 0.1 * span, count)


def _run_candidate(args):
    zd, term, w, u_init, opts = args
    return optimize(zd, term, w, u_init, opts)


def select_t2(u_init: ControlSignal, zd: ZeroDynamics, term: TerminalCondition,
              w: CostWeights, candidates=None, opts: OptimizerOptions | None = None,
              workers: int = 1, refine: OptimizerOptions | None = None):
    """Optimize once per candidate extremum time and keep the cheapest run.

    With ``refine`` the candidates are only scanned with ``opts`` (typically
    a short budget) and the winner is then optimized further from its scan
    result under ``refine``; the histories of both stages are joined.

    Returns ``(t2_best, result)``; ``result.candidate_costs`` maps every
    candidate to its scan cost.
    """
    if candidates is None:
        candidates = default_t2_candidates(u_init.grid)
    candidates = [float(c) for c in candidates]
    if not candidates:
        raise ValueError("no t2 candidates given")
    jobs = [(zd, term, replace(w, t2=c), u_init, opts) for c in candidates]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_candidate, jobs))
    else:
        results = [_run_candidate(j) for j in jobs]
    costs = {c: r.cost for c, r in zip(candidates, results)}
    best = min(range(len(candidates)), key=lambda i: results[i].cost)
    result = results[best]
    if refine is not None:
        more = optimize(zd, term, jobs[best][2], result.u_opt, refine)
        result = replace(
            more,
            cost_history=result.cost_history + more.cost_history[1:],
            grad_norm_history=result.grad_norm_history + more.grad_norm_history[1:],
            iterations=result.iterations + more.iterations,
        )
    result.candidate_costs = costs
    return candidates[best], result
