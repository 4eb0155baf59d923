import numpy as np
import pytest

from bqc.circuits import ROTATION_AXIS, Circuit
from bqc.statevector import X_MATRIX, StateVector, rx, ry, rz

_ROT = {"X": rx, "Y": ry, "Z": rz}


def gate_matrix_dense(gate, num_qubits):
    """Full 2^N x 2^N unitary of a bound gate, built column by column from bit arithmetic."""
    N = num_qubits
    M = _ROT[ROTATION_AXIS[gate.kind]](gate.param) if gate.kind in ROTATION_AXIS else X_MATRIX
    t = gate.target
    tshift = N - 1 - t
    U = np.zeros((2 ** N, 2 ** N), dtype=complex)
    for j in range(2 ** N):
        if all((j >> (N - 1 - c)) & 1 == b for c, b in zip(gate.controls, gate.control_bits)):
            bt = (j >> tshift) & 1
            for a in (0, 1):
                i = (j & ~(1 << tshift)) | (a << tshift)
                U[i, j] += M[a, bt]
        else:
            U[j, j] = 1
    return U


def circuit_unitary_dense(circuit: Circuit):
    U = np.eye(2 ** circuit.num_qubits, dtype=complex)
    for g in circuit.gates:
        U = gate_matrix_dense(g, circuit.num_qubits) @ U
    return U


def random_amplitudes(n, rng):
    a = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return a / np.linalg.norm(a)


def random_state(n, rng):
    return StateVector.from_amplitudes(random_amplitudes(n, rng))


def equal_up_to_phase(a, b, atol=1e-10):
    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    k = np.argmax(np.abs(b))
    phase = a[k] / b[k]
    if abs(abs(phase) - 1) > atol:
        return False
    return np.max(np.abs(a - phase * b)) <= atol


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# --------------------------------------------------------------------------
# acceptance summary: one line per criterion in the terminal report

_ACCEPTANCE = []


@pytest.fixture
def record_criterion():
    def record(number, title, ok, detail):
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
