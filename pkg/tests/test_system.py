import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memtransfer.presets import LambdaParams, lambda_system
from memtransfer.system import (
    InvariantError,
    MemorySystem,
    ModeDimensions,
    PassiveLinearSystem,
    apply_mode_transformation,
    assemble_heisenberg_drift,
    assemble_omega,
)


def random_hermitian(rng, n):
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (m + m.conj().T)


def random_system(seed, n1=2, n2=2):
    rng = np.random.default_rng(seed)
    return MemorySystem(
        dims=ModeDimensions(n1, n2),
        F00=rng.standard_normal(),
        F01=rng.standard_normal(n1) + 1j * rng.standard_normal(n1),
        F11=random_hermitian(rng, n1),
        G11=random_hermitian(rng, n1),
        G12=rng.standard_normal((n1, n2)) + 1j * rng.standard_normal((n1, n2)),
        G22=random_hermitian(rng, n2),
        c=complex(rng.standard_normal(), rng.standard_normal()),
    )


def random_unitary(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_mode_dimensions():
    d = ModeDimensions(2, 3)
    assert d.n == 6
    assert d.memory == slice(3, 6)
    with pytest.raises(InvariantError):
        ModeDimensions(0, 1)


def test_omega_without_control_is_F():
    sys = random_system(1)
    np.testing.assert_array_equal(assemble_omega(sys, 0.0), sys.F)


def test_lambda_omega_entries():
    om = assemble_omega(lambda_system(LambdaParams(kappa=1.0, gN=1.3)), 1.0)
    assert om[0, 1] == -1.3
    assert om[1, 2] == -1.0
    assert om[0, 2] == 0 and om[2, 0] == 0
    np.testing.assert_array_equal(om, om.conj().T)


def test_random_omega_hermitian():
    om = assemble_omega(random_system(2), 0.7)
    assert np.max(np.abs(om - om.conj().T)) <= 1e-12


def test_lambda_drift_matches_displayed_matrix():
    A = assemble_heisenberg_drift(lambda_system(LambdaParams(kappa=1.0, gN=1.0)), 0.0)
    expected = np.array([[-1, 1j, 0], [1j, 0, 0], [0, 0, 0]])
    np.testing.assert_allclose(A, expected, atol=1e-15)


def test_pure_decay_drift():
    sys = PassiveLinearSystem(np.zeros((3, 3)), np.zeros((3, 3)), [2.0, 0, 0])
    np.testing.assert_allclose(assemble_heisenberg_drift(sys, 0.4), np.diag([-2.0, 0, 0]))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), u=st.floats(-5, 5))
def test_passivity_identity(seed, u):
    sys = random_system(seed)
    A = assemble_heisenberg_drift(sys, u)
    CC = np.outer(sys.C.conj(), sys.C)
    assert np.max(np.abs(A + A.conj().T + CC)) <= 1e-12
    om = assemble_omega(sys, u)
    assert np.max(np.abs(om - om.conj().T)) <= 1e-12


def test_memory_decouples_without_control():
    sys = random_system(3, n1=2, n2=3)
    A = assemble_heisenberg_drift(sys, 0.0)
    m = sys.dims.memory
    assert not np.any(A[m, :]) and not np.any(A[:, m])


def test_non_hermitian_block_rejected():
    with pytest.raises(InvariantError, match="F11"):
        MemorySystem(ModeDimensions(1, 1), 0.0, [1.0], [[1j]], [[0]], [[1]], [[0]], 1.0)


def test_zero_coupling_rejected():
    with pytest.raises(InvariantError):
        MemorySystem(ModeDimensions(1, 1), 0.0, [1.0], [[0]], [[0]], [[1]], [[0]], 0.0)


def test_identity_transformation():
    sys = random_system(4)
    A = assemble_heisenberg_drift(sys, 0.3)
    A2, C2 = apply_mode_transformation(A, sys.C, np.eye(sys.n))
    np.testing.assert_allclose(A2, A, atol=1e-15)
    np.testing.assert_allclose(C2, sys.C, atol=1e-15)


def test_transformation_preserves_spectrum():
    rng = np.random.default_rng(5)
    sys = random_system(5)
    A = assemble_heisenberg_drift(sys, -0.8)
    A2, _ = apply_mode_transformation(A, sys.C, random_unitary(rng, sys.n))
    ev = np.sort_complex(np.linalg.eigvals(A))
    ev2 = np.sort_complex(np.linalg.eigvals(A2))
    np.testing.assert_allclose(ev, ev2, atol=1e-10)


def test_non_unitary_rejected_with_defect():
    with pytest.raises(InvariantError, match="unitary") as exc:
        apply_mode_transformation(np.eye(2), np.ones(2), np.diag([1.0, 1.1]))
    assert "2.100e-01" in str(exc.value)


def test_json_round_trip(tmp_path):
    sys = random_system(6, n1=1, n2=2)
    path = tmp_path / "sys.json"
    path.write_text(json.dumps(sys.to_dict()))
    back = MemorySystem.from_json(path)
    np.testing.assert_array_equal(back.F, sys.F)
    np.testing.assert_array_equal(back.G, sys.G)
    np.testing.assert_array_equal(back.C, sys.C)


def test_json_missing_field():
    d = random_system(7).to_dict()
    del d["G12"]
    with pytest.raises(InvariantError, match="G12"):
        MemorySystem.from_dict(d)
