"""Weak-Wolfe line search: expand/backtrack to a bracket, then zoom."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable


@dataclass
class LineSearchResult:
    success: bool
    step: float
    value: float
    slope: float
    payload: object
    trials: int


def wolfe_search(phi: Callable, phi0: float, dphi0: float, step0: float,
                 mu1: float = 1e-4, mu2: float = 0.9, max_trials: int = 50,
                 expand: float = 2.0) -> LineSearchResult:
    """Find a step satisfying the Armijo and curvature conditions.

    ``phi(step, need_slope)`` returns ``(value, slope, payload)``; ``slope``
    may be ``None`` when ``need_slope`` is false.  A trial whose value is not
    finite, or that the caller flags by returning ``value=inf``, counts as a
    failed sufficient-decrease test.
    """
    if not dphi0 < 0:
        raise ValueError("search direction is not a descent direction")
    lo, phi_lo, dphi_lo = 0.0, phi0, dphi0
    hi = math.inf
    step = step0
    for trial in range(1, max_trials + 1):
        value, _, payload = phi(step, False)
        armijo = (
            math.isfinite(value)
            and value <= phi0 + mu1 * step * dphi0
            and value < phi0
        )
        if not armijo:
            hi = step
        else:
            value, slope, payload = phi(step, True)
            if slope >= mu2 * dphi0:
                return LineSearchResult(True, step, value, slope, payload, trial)
            lo, phi_lo, dphi_lo = step, value, slope
        if math.isinf(hi):
            step = expand * lo
            continue
        # safeguarded quadratic interpolation inside [lo, hi]
        width = hi - lo
        step = 0.5 * (lo + hi)
        if math.isfinite(value) and not armijo:
            denom = 2.0 * (value - phi_lo - dphi_lo * width)
            if denom > 0:
                step = lo - dphi_lo * width * width / denom
        step = min(max(step, lo + 0.1 * width), hi - 0.1 * width)
    return LineSearchResult(False, lo, phi_lo, dphi_lo, None, max_trials)
