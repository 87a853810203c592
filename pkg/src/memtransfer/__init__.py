"""Single-photon write-in to passive linear quantum memories.

Build a system (:mod:`.presets` or :class:`.MemorySystem`), shape the input
pulse through the zero dynamics, and optimize the control toward a unimodal
pulse with :func:`.optimize`.
"""
from .control import (
    CostWeights,
    OptimizationResult,
    OptimizerOptions,
    cost_and_gradient,
    optimize,
    select_t2,
    total_cost,
)
from .dynamics import propagate_correlation, propagate_eta, transition_matrix
from .presets import LambdaParams, NetworkParams, ensemble_network, lambda_system, make_preset
from .signals import ControlSignal, PulseSignal, TimeGrid, Trajectory
from .system import MemorySystem, ModeDimensions, PassiveLinearSystem, assemble_heisenberg_drift
from .zero_dynamics import TerminalCondition, build_zero_dynamics, rising_exponential, solve_backward

__all__ = [
    "ControlSignal",
    "CostWeights",
    "LambdaParams",
    "MemorySystem",
    "ModeDimensions",
    "NetworkParams",
    "OptimizationResult",
    "OptimizerOptions",
    "PassiveLinearSystem",
    "PulseSignal",
    "TerminalCondition",
    "TimeGrid",
    "Trajectory",
    "assemble_heisenberg_drift",
    "build_zero_dynamics",
    "cost_and_gradient",
    "ensemble_network",
    "lambda_system",
    "make_preset",
    "optimize",
    "propagate_correlation",
    "propagate_eta",
    "rising_exponential",
    "select_t2",
    "solve_backward",
    "total_cost",
    "transition_matrix",
]
