"""Block-structured passive linear quantum memory systems.

A memory system has a single port mode ``a0`` coupled to the input field,
``n1`` buffer modes and ``n2`` memory modes.  Its Hamiltonian matrix is
``Omega(u) = F + G u`` with the block layout::

    F = [[F00,    F01, 0],        G = [[0, 0,     0  ],
         [F01^H,  F11, 0],             [0, G11,   G12],
         [0,      0,   0]]             [0, G12^H, G22]]

and the field coupling is ``C = [c, 0, ..., 0]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10


class InvariantError(ValueError):
    """Raised when a system definition violates a structural invariant."""


def _max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def _check_hermitian(name: str, m: np.ndarray) -> None:
    defect = _max_abs(m - m.conj().T)
    if defect > HERMITIAN_TOL:
        raise InvariantError(f"{name} is not Hermitian (max |M - M^H| = {defect:.3e})")


@dataclass(frozen=True)
class ModeDimensions:
    """Buffer and memory mode counts; the port block always has one mode."""

    n1: int
    n2: int

    def __post_init__(self):
        if int(self.n1) < 1 or int(self.n2) < 1:
            raise InvariantError(f"need n1 >= 1 and n2 >= 1, got ({self.n1}, {self.n2})")

    @property
    def n(self) -> int:
        return 1 + self.n1 + self.n2

    @property
    def buffer(self) -> slice:
        """Indices of the port and buffer modes (a0, a1)."""
        return slice(0, 1 + self.n1)

    @property
    def memory(self) -> slice:
        return slice(1 + self.n1, self.n)


@dataclass(frozen=True)
class PassiveLinearSystem:
    """Generic passive linear system given by full matrices.

    ``Omega(u) = F + G u`` and the time-invariant coupling row ``C``.  Used
    for systems that do not carry the memory block structure, e.g. a bare
    single-mode cavity.
    """

    F: np.ndarray
    G: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.F, dtype=complex))
        G = np.atleast_2d(np.asarray(self.G, dtype=complex))
        C = np.atleast_1d(np.asarray(self.C, dtype=complex)).ravel()
        n = C.size
        if F.shape != (n, n) or G.shape != (n, n):
            raise InvariantError(f"F, G must be {n}x{n} to match C")
        _check_hermitian("F", F)
        _check_hermitian("G", G)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.C.size


@dataclass(frozen=True)
class MemorySystem:
    """Memory system described by its blocks.

    Parameters
    ----------
    dims : ModeDimensions
    F00 : float
        Port-mode frequency (real because a 1x1 Hermitian block is real).
    F01 : array_like, shape (n1,)
        Port-to-buffer coupling row.
    F11, G11 : array_like, shape (n1, n1)
        Hermitian buffer blocks.
    G12 : array_like, shape (n1, n2)
        Controlled buffer-to-memory coupling.
    G22 : array_like, shape (n2, n2)
        Hermitian controlled memory block.
    c : complex
        Field coupling of the port mode, must be nonzero.
    """

    dims: ModeDimensions
    F00: float
    F01: np.ndarray
    F11: np.ndarray
    G11: np.ndarray
    G12: np.ndarray
    G22: np.ndarray
    c: complex
    F: np.ndarray = field(init=False, repr=False, compare=False)
    G: np.ndarray = field(init=False, repr=False, compare=False)
    C: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n1, n2 = self.dims.n1, self.dims.n2
        shapes = {
            "F01": (n1,),
            "F11": (n1, n1),
            "G11": (n1, n1),
            "G12": (n1, n2),
            "G22": (n2, n2),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=complex).reshape(shape)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.iscomplexobj(self.F00) and abs(np.imag(self.F00)) > HERMITIAN_TOL:
            raise InvariantError("F00 must be real")
        object.__setattr__(self, "F00", float(np.real(self.F00)))
        object.__setattr__(self, "c", complex(self.c))
        if self.c == 0:
            raise InvariantError("port coupling c must be nonzero")
        for name in ("F11", "G11", "G22"):
            _check_hermitian(name, getattr(self, name))

        n = self.dims.n
        m = self.dims.memory
        F = np.zeros((n, n), dtype=complex)
        F[0, 0] = self.F00
        F[0, 1:1 + n1] = self.F01
        F[1:1 + n1, 0] = self.F01.conj()
        F[1:1 + n1, 1:1 + n1] = self.F11
        G = np.zeros((n, n), dtype=complex)
        G[1:1 + n1, 1:1 + n1] = self.G11
        G[1:1 + n1, m] = self.G12
        G[m, 1:1 + n1] = self.G12.conj().T
        G[m, m] = self.G22
        C = np.zeros(n, dtype=complex)
        C[0] = self.c
        for name, arr in (("F", F), ("G", G), ("C", C)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.dims.n

    # -- JSON -------------------------------------------------------------

    def to_dict(self) -> dict:
        def enc(a):
            a = np.asarray(a, dtype=complex)
            if a.ndim == 0:
                return [float(a.real), float(a.imag)]
            return [enc(v) for v in a]

        return {
            "n1": self.dims.n1,
            "n2": self.dims.n2,
            "F00": self.F00,
            "F01": enc(self.F01),
            "F11": enc(self.F11),
            "G11": enc(self.G11),
            "G12": enc(self.G12),
            "G22": enc(self.G22),
            "c": enc(self.c),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MemorySystem":
        """Build a system from a JSON-style dict with ``[re, im]`` pairs."""
        missing = {"n1", "n2", "F00", "F01", "F11", "G11", "G12", "G22", "c"} - set(d)
        if missing:
            raise InvariantError(f"system definition missing fields: {sorted(missing)}")
        F00 = d["F00"]
        if isinstance(F00, (list, tuple)):
            F00 = decode_complex(F00)
        return cls(
            dims=ModeDimensions(int(d["n1"]), int(d["n2"])),
            F00=F00,
            F01=decode_complex(d["F01"]),
            F11=decode_complex(d["F11"]),
            G11=decode_complex(d["G11"]),
            G12=decode_complex(d["G12"]),
            G22=decode_complex(d["G22"]),
            c=decode_complex(d["c"]),
        )

    @classmethod
    def from_json(cls, path) -> "MemorySystem":
        return cls.from_dict(json.loads(Path(path).read_text()))


def decode_complex(obj):
    """Decode nested ``[re, im]`` pairs into a complex ndarray (or scalar)."""
    arr = np.asarray(obj, dtype=float)
    if arr.shape[-1:] != (2,):
        raise InvariantError("complex numbers must be encoded as [re, im] pairs")
    out = arr[..., 0] + 1j * arr[..., 1]
    return complex(out) if out.ndim == 0 else out


def assemble_omega(sys, u: float) -> np.ndarray:
    """Hamiltonian matrix ``F + G u``."""
    return sys.F + sys.G * float(u)


def drift_parts(sys) -> tuple[np.ndarray, np.ndarray]:
    """Split the Heisenberg drift as ``A(u) = A_free + u A_ctrl``."""
    C = np.asarray(sys.C)
    A_free = -1j * sys.F - 0.5 * np.outer(C.conj(), C)
    A_ctrl = -1j * sys.G
    return A_free, A_ctrl


def assemble_heisenberg_drift(sys, u: float) -> np.ndarray:
    """Drift ``A = -i Omega(u) - C^H C / 2`` of the Heisenberg/pulse dynamics."""
    C = np.asarray(sys.C)
    return -1j * assemble_omega(sys, u) - 0.5 * np.outer(C.conj(), C)


def apply_mode_transformation(A: np.ndarray, C: np.ndarray, U: np.ndarray):
    """Change of mode basis ``a' = U^H a``.

    Returns ``(U^H A U, C U)``.  Raises :class:`InvariantError` if ``U`` is
    not unitary to within ``UNITARY_TOL``.
    """
    U = np.asarray(U, dtype=complex)
    defect = _max_abs(U.conj().T @ U - np.eye(U.shape[0]))
    if defect > UNITARY_TOL:
        raise InvariantError(f"U is not unitary (max |U^H U - I| = {defect:.3e})")
    return U.conj().T @ np.asarray(A) @ U, np.asarray(C) @ U
