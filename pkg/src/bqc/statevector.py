"""Dense state-vector simulation.

Qubit 0 is the most significant bit of a basis index, so for ``N`` qubits the
basis state ``|b_0 b_1 ... b_{N-1}>`` sits at index ``sum(b_q << (N-1-q))``.

Amplitudes are kept as a complex128 array of shape ``(2,) * N`` (one axis per
qubit) so a gate on qubit ``q`` is an update along axis ``q``. Controlled gates
index the control axes with fixed integers, which yields a *view* of exactly
the controlled subspace; amplitudes outside it are never touched.

The batch kernels operate on an extra leading batch axis and accept one
2x2 matrix (or one set of entries) per batch element. They are what the gradient engines use to run
many shifted circuits at once.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .distribution import DiscreteDistribution
from .errors import ValidationError

MAX_QUBITS = 24
UNITARY_TOL = 1e-10

#: Sentinel for "infinitely many measurements": read probabilities directly.
EXACT = "exact"

X_MATRIX = np.array([[0, 1], [1, 0]], dtype=complex)


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]])


# --------------------------------------------------------------------------
# batched kernels


@lru_cache(maxsize=8192)
def pair_index(num_qubits: int, target: int, controls: tuple = (), bits: tuple | None = None):
    """Basic-index tuples selecting target=0 / target=1 inside the controlled subspace.

    Both index a batch array of shape ``(B,) + (2,) * num_qubits`` and return
    views, so reads and writes touch only the controlled subspace.
    """
    if bits is None:
        bits = (1,) * len(controls)
    idx = [slice(None)] * (num_qubits + 1)
    for c, b in zip(controls, bits):
        idx[1 + c] = int(b)
    i0, i1 = list(idx), list(idx)
    i0[1 + target] = 0
    i1[1 + target] = 1
    return tuple(i0), tuple(i1)


def rotation_entries(axis: str, theta):
    """``(m00, m01, m10, m11)`` of a rotation; ``theta`` may be a scalar or an array."""
    c, s = np.cos(np.asarray(theta) / 2), np.sin(np.asarray(theta) / 2)
    if axis == "Y":
        return c, -s, s, c
    if axis == "X":
        return c, -1j * s, -1j * s, c
    if axis == "Z":
        e = c - 1j * s
        return e, 0.0, 0.0, e.conjugate()
    raise ValidationError(f"unknown rotation axis {axis!r}")


def rotation_derivative_entries(axis: str, theta):
    """Entries of d/dtheta of :func:`rotation_entries`."""
    c, s = np.cos(np.asarray(theta) / 2) / 2, np.sin(np.asarray(theta) / 2) / 2
    if axis == "Y":
        return -s, -c, c, -s
    if axis == "X":
        return -s, -1j * c, -1j * c, -s
    if axis == "Z":
        e = -s - 1j * c
        return e, 0.0, 0.0, e.conjugate()
    raise ValidationError(f"unknown rotation axis {axis!r}")


def _expand(entries, ndim: int):
    out = []
    for e in entries:
        e = np.asarray(e)
        out.append(e.reshape(e.shape + (1,) * (ndim - 1)) if e.ndim == 1 else e)
    return out


def apply_pair(psi: np.ndarray, i0, i1, entries) -> None:
    """``[a0, a1] <- M [a0, a1]`` on the views ``psi[i0]``, ``psi[i1]``; in place.

    ``entries`` are scalars or per-batch vectors.
    """
    a0, a1 = psi[i0], psi[i1]
    m00, m01, m10, m11 = _expand(entries, a0.ndim)
    new0 = m00 * a0 + m01 * a1
    psi[i1] = m10 * a0 + m11 * a1
    psi[i0] = new0


def swap_pair(psi: np.ndarray, i0, i1) -> None:
    a0 = psi[i0].copy()
    psi[i0] = psi[i1]
    psi[i1] = a0


def apply_batch(psi: np.ndarray, mats: np.ndarray, target: int,
                controls: Sequence[int] = (), bits: Sequence[int] | None = None) -> None:
    """Apply ``mats`` to ``target`` of every batch element, in place.

    ``psi`` has shape ``(B,) + (2,) * N``; ``mats`` is ``(2, 2)`` or
    ``(B, 2, 2)``. ``bits`` gives the required value of each control
    (default all ones).
    """
    i0, i1 = pair_index(psi.ndim - 1, target, tuple(controls), None if bits is None else tuple(bits))
    m = np.asarray(mats)
    apply_pair(psi, i0, i1, (m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]))


def apply_x_batch(psi: np.ndarray, target: int, controls: Sequence[int] = (),
                  bits: Sequence[int] | None = None) -> None:
    """Controlled bit flip, in place (a swap, no arithmetic)."""
    swap_pair(psi, *pair_index(psi.ndim - 1, target, tuple(controls), None if bits is None else tuple(bits)))


# --------------------------------------------------------------------------
# single-state API


@dataclass(eq=False)
class StateVector:
    """Pure state of ``num_qubits`` qubits; ``amplitudes`` is the flat view."""

    num_qubits: int
    tensor: np.ndarray  # shape (1,) + (2,) * num_qubits

    @property
    def amplitudes(self) -> np.ndarray:
        return self.tensor.reshape(-1)

    @classmethod
    def from_amplitudes(cls, amplitudes, normalize: bool = False) -> "StateVector":
        a = np.array(amplitudes, dtype=complex).reshape(-1)
        n = int(round(np.log2(a.size))) if a.size else 0
        if a.size < 2 or 2 ** n != a.size:
            raise ValidationError(f"amplitude count {a.size} is not a power of two >= 2")
        _check_size(n)
        norm = np.linalg.norm(a)
        if normalize:
            a = a / norm
        elif abs(norm ** 2 - 1) > UNITARY_TOL:
            raise ValidationError(f"state norm^2 is {norm ** 2!r}, expected 1")
        return cls(n, a.reshape((1,) + (2,) * n))

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.tensor.copy())

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def __repr__(self):
        return f"StateVector(num_qubits={self.num_qubits})"


def _check_size(num_qubits: int) -> None:
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ValidationError(f"num_qubits must lie in [1, {MAX_QUBITS}], got {num_qubits}")


def init_zero(num_qubits: int) -> StateVector:
    """``|0...0>`` on ``num_qubits`` qubits."""
    _check_size(num_qubits)
    t = np.zeros((1,) + (2,) * num_qubits, dtype=complex)
    t.reshape(-1)[0] = 1.0
    return StateVector(num_qubits, t)


def _check_unitary(gate: np.ndarray) -> np.ndarray:
    g = np.asarray(gate, dtype=complex)
    if g.shape != (2, 2):
        raise ValidationError(f"expected a 2x2 gate, got shape {g.shape}")
    if not np.allclose(g.conj().T @ g, np.eye(2), rtol=0, atol=UNITARY_TOL):
        raise ValidationError("gate matrix is not unitary")
    return g


def _check_qubit(state: StateVector, q: int) -> None:
    if not 0 <= q < state.num_qubits:
        raise IndexError(f"qubit {q} out of range for {state.num_qubits} qubits")


def apply_single(state: StateVector, gate, qubit: int) -> StateVector:
    """Apply a 2x2 unitary to one qubit (in place); returns ``state``."""
    g = _check_unitary(gate)
    _check_qubit(state, qubit)
    apply_batch(state.tensor, g, qubit)
    return state


def apply_controlled(state: StateVector, gate, controls, target: int) -> StateVector:
    """Apply ``gate`` to ``target`` where every ``(qubit, bit)`` control matches.

    ``controls`` is a list of ``(qubit, required_bit)`` pairs; a bare integer
    means a control on ``|1>``. With no controls this is :func:`apply_single`.
    """
    g = _check_unitary(gate)
    _check_qubit(state, target)
    qubits, bits = [], []
    for c in controls:
        q, b = (c, 1) if isinstance(c, (int, np.integer)) else c
        _check_qubit(state, q)
        if b not in (0, 1):
            raise ValidationError(f"control bit must be 0 or 1, got {b!r}")
        qubits.append(int(q))
        bits.append(int(b))
    if target in qubits or len(set(qubits)) != len(qubits):
        raise ValidationError("control and target qubits must be distinct")
    apply_batch(state.tensor, g, target, qubits, bits)
    return state


def probabilities(state: StateVector) -> DiscreteDistribution:
    """Born-rule outcome probabilities ``|alpha_i|^2``."""
    a = state.amplitudes
    p = a.real ** 2 + a.imag ** 2
    return DiscreteDistribution(p / p.sum())


@dataclass(frozen=True)
class ShotResult:
    """Measurement counts; ``total_shots`` is a positive int or :data:`EXACT`."""

    counts: dict
    total_shots: int | str

    def frequencies(self, size: int) -> np.ndarray:
        f = np.zeros(size)
        for k, v in self.counts.items():
            f[k] = v
        return f / f.sum()


def sample_probs(p: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Count vector of ``shots`` i.i.d. draws from ``p`` (multinomial)."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    return rng.multinomial(shots, p / p.sum())


def sample(state: StateVector, shots: int, seed: int) -> ShotResult:
    """Measure ``shots`` copies of ``state`` in the computational basis.

    Draws come from one multinomial call on a fresh
    ``numpy.random.default_rng(seed)`` (PCG64), so results are reproducible.
    """
    if isinstance(shots, bool) or not isinstance(shots, (int, np.integer)) or shots < 1:
        raise ValidationError(f"shots must be a positive integer, got {shots!r}")
    counts = sample_probs(probabilities(state).probs, int(shots), np.random.default_rng(seed))
    nz = np.flatnonzero(counts)
    return ShotResult({int(i): int(counts[i]) for i in nz}, int(shots))
