"""The two example memories: a Lambda-type atomic medium in a cavity and a
cavity coupled to a network of three atomic ensembles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .system import InvariantError, MemorySystem, ModeDimensions


@dataclass(frozen=True)
class LambdaParams:
    """Cavity half-decay rate ``kappa``, collective coupling ``gN = g sqrt(N)``
    and detuning (zero in the reference setup)."""

    kappa: float = 1.0
    gN: float = 1.0
    delta_detuning: float = 0.0

    def __post_init__(self):
        if not (self.kappa > 0 and self.gN > 0):
            raise InvariantError("kappa and gN must be positive")


@dataclass(frozen=True)
class NetworkParams:
    kappa: float = 1.0
    g: float = 0.5

    def __post_init__(self):
        if not (self.kappa > 0 and self.g > 0):
            raise InvariantError("kappa and g must be positive")


def lambda_system(p: LambdaParams = LambdaParams()) -> MemorySystem:
    """Modes ordered (E, P, S): cavity field, polarization, spin wave.

    The input and output fields carry the phase convention ``b' = -i b``,
    so that ``c = i sqrt(2 kappa)``.
    """
    return MemorySystem(
        dims=ModeDimensions(1, 1),
        F00=0.0,
        F01=[-p.gN],
        F11=[[p.delta_detuning]],
        G11=[[0.0]],
        G12=[[-1.0]],
        G22=[[0.0]],
        c=1j * np.sqrt(2.0 * p.kappa),
    )


def network_unitary() -> np.ndarray:
    s2, s3, s6 = np.sqrt(2.0), np.sqrt(3.0), np.sqrt(6.0)
    return np.array(
        [
            [1, 0, 0, 0],
            [0, 1 / s3, 2 / s6, 0],
            [0, 1 / s3, -1 / s6, 1 / s2],
            [0, 1 / s3, -1 / s6, -1 / s2],
        ],
        dtype=complex,
    )


def network_physical_drift(p: NetworkParams, u: float) -> tuple[np.ndarray, np.ndarray]:
    """Drift and coupling row in the physical basis (cavity, three ensembles)."""
    k, g = p.kappa, p.g
    A = np.array(
        [
            [-k / 2, g, g, g],
            [-g, -1j * u, 0, 0],
            [-g, 0, 1j * u, 0],
            [-g, 0, 0, 0],
        ],
        dtype=complex,
    )
    C = np.array([-np.sqrt(k), 0, 0, 0], dtype=complex)
    return A, C


def ensemble_network(p: NetworkParams = NetworkParams()) -> tuple[MemorySystem, np.ndarray]:
    """Network memory in the rotated basis ``a' = U^H a``.

    Buffer: ``a'1`` (port) and ``a'2``; memory: ``a'3``, ``a'4``.  Returns
    the system together with ``U`` for mapping back to ensemble modes.
    """
    s2, s3, s6 = np.sqrt(2.0), np.sqrt(3.0), np.sqrt(6.0)
    sys = MemorySystem(
        dims=ModeDimensions(1, 2),
        F00=0.0,
        F01=[1j * s3 * p.g],
        F11=[[0.0]],
        G11=[[0.0]],
        G12=[[1 / s2, -1 / s6]],
        G22=[[0.5, 1 / (2 * s3)], [1 / (2 * s3), -0.5]],
        # differs from C U by a global sign, which drops out of every |.|^2
        c=np.sqrt(p.kappa),
    )
    return sys, network_unitary()


PRESETS = {
    "lambda": (lambda_system, LambdaParams),
    "network": (lambda p: ensemble_network(p)[0], NetworkParams),
}

# memory target used in the worked examples
DEFAULT_TARGETS = {
    "lambda": [0, 0, 1],
    "network": [0, 0, 0, 1],
}


def make_preset(name: str, **overrides) -> MemorySystem:
    """Build a preset system by name with parameter overrides."""
    try:
        factory, params = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory(params(**overrides))
