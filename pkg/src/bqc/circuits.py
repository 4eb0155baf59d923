"""Symbolic circuits, ansatz builders, simulation and gate decomposition.

Register layout: data qubits are ``0 .. n-1`` and ancilla qubits are
``n .. n+m-1``. Latent state ``lambda_i`` is the ancilla basis state whose
integer value (ancilla ``n`` most significant) is ``i``.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .errors import BindingError, CapacityError, ValidationError
from .statevector import (
    StateVector,
    _check_size,
    apply_pair,
    apply_x_batch,
    pair_index,
    rotation_entries,
)

RX, RY, RZ, X = "RX", "RY", "RZ", "X"
CNOT, CRY, TOFFOLI, MULTI_CTRL_RY = "CNOT", "CRY", "TOFFOLI", "MULTI_CTRL_RY"

ROTATION_AXIS = {RX: "X", RY: "Y", RZ: "Z", CRY: "Y", MULTI_CTRL_RY: "Y"}
_ARITY = {RX: 1, RY: 1, RZ: 1, X: 1, CNOT: 2, CRY: 2, TOFFOLI: 3}
SLOT_NAMES = ("gamma", "theta")

PER_LATENT_STATE = "per_latent_state"
PER_ANCILLA_QUBIT = "per_ancilla_qubit"


class Slot(NamedTuple):
    """Symbolic reference to ``params.<name>[index]``."""

    name: str
    index: int

    def __str__(self):
        return f"slot:{self.name}[{self.index}]"


@dataclass(frozen=True)
class GateSpec:
    kind: str
    qubits: tuple
    param: float | Slot | None = None
    ctrl_state: tuple | None = None  # MULTI_CTRL_RY only; defaults to all ones

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        k, qs = self.kind, self.qubits
        if k == MULTI_CTRL_RY:
            if len(qs) < 2:
                raise ValidationError("MULTI_CTRL_RY needs at least one control")
            cs = (1,) * (len(qs) - 1) if self.ctrl_state is None else tuple(int(b) for b in self.ctrl_state)
            if len(cs) != len(qs) - 1 or any(b not in (0, 1) for b in cs):
                raise ValidationError(f"bad ctrl_state {self.ctrl_state!r} for {len(qs) - 1} controls")
            object.__setattr__(self, "ctrl_state", cs)
        elif k in _ARITY:
            if len(qs) != _ARITY[k]:
                raise ValidationError(f"{k} acts on {_ARITY[k]} qubit(s), got {len(qs)}")
            if self.ctrl_state is not None:
                raise ValidationError(f"{k} takes no ctrl_state")
        else:
            raise ValidationError(f"unknown gate kind {k!r}")
        if len(set(qs)) != len(qs) or min(qs) < 0:
            raise ValidationError(f"qubit indices must be distinct and nonnegative: {qs}")
        if k in ROTATION_AXIS:
            if self.param is None:
                raise ValidationError(f"{k} needs a parameter")
            if isinstance(self.param, Slot):
                if self.param.name not in SLOT_NAMES or self.param.index < 0:
                    raise ValidationError(f"bad slot {self.param}")
            else:
                object.__setattr__(self, "param", float(self.param))
        elif self.param is not None:
            raise ValidationError(f"{k} takes no parameter")

    @property
    def controls(self) -> tuple:
        return self.qubits[:-1]

    @property
    def target(self) -> int:
        return self.qubits[-1]

    @property
    def control_bits(self) -> tuple:
        if self.kind == MULTI_CTRL_RY:
            return self.ctrl_state
        return (1,) * (len(self.qubits) - 1)

    @property
    def is_symbolic(self) -> bool:
        return isinstance(self.param, Slot)


@dataclass
class ParameterSet:
    """Prior-block angles ``gamma`` and likelihood-block angles ``theta`` (radians)."""

    gamma: np.ndarray = field(default_factory=lambda: np.zeros(0))
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gamma_frozen: bool = False
    theta_frozen: bool = False

    def __post_init__(self):
        self.gamma = np.array(self.gamma, dtype=float).reshape(-1)
        self.theta = np.array(self.theta, dtype=float).reshape(-1)

    def __getitem__(self, name: str) -> np.ndarray:
        if name not in SLOT_NAMES:
            raise KeyError(name)
        return getattr(self, name)

    def frozen(self, name: str) -> bool:
        return getattr(self, f"{name}_frozen")

    @property
    def trainable(self) -> str:
        """Name of the single unfrozen vector."""
        free = [n for n in SLOT_NAMES if not self.frozen(n)]
        if len(free) != 1:
            raise ValidationError(f"exactly one of gamma/theta must be unfrozen, got {free}")
        return free[0]

    def with_values(self, name: str, values) -> "ParameterSet":
        new = self.copy()
        setattr(new, name, np.array(values, dtype=float).reshape(-1))
        return new

    def copy(self) -> "ParameterSet":
        return ParameterSet(self.gamma.copy(), self.theta.copy(), self.gamma_frozen, self.theta_frozen)

    def to_dict(self) -> dict:
        return {"gamma": self.gamma.tolist(), "theta": self.theta.tolist(),
                "gamma_frozen": self.gamma_frozen, "theta_frozen": self.theta_frozen}

    @classmethod
    def from_dict(cls, d: dict) -> "ParameterSet":
        return cls(d.get("gamma", []), d.get("theta", []),
                   bool(d.get("gamma_frozen", False)), bool(d.get("theta_frozen", False)))


@dataclass(frozen=True)
class _Op:
    kind: str
    target: int
    controls: tuple
    bits: tuple
    axis: str | None


@dataclass(frozen=True)
class Circuit:
    num_data_qubits: int
    num_ancilla_qubits: int = 0
    gates: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.num_data_qubits < 0 or self.num_ancilla_qubits < 0:
            raise ValidationError("register sizes must be nonnegative")
        _check_size(self.num_qubits)
        for g in self.gates:
            if max(g.qubits) >= self.num_qubits:
                raise ValidationError(f"{g.kind} on {g.qubits} exceeds {self.num_qubits} qubits")

    @property
    def num_qubits(self) -> int:
        return self.num_data_qubits + self.num_ancilla_qubits

    def __add__(self, other: "Circuit") -> "Circuit":
        if (self.num_data_qubits, self.num_ancilla_qubits) != (other.num_data_qubits, other.num_ancilla_qubits):
            raise ValidationError("cannot concatenate circuits on different registers")
        return Circuit(self.num_data_qubits, self.num_ancilla_qubits, self.gates + other.gates)

    def slot_counts(self) -> dict:
        """Number of slots referenced per vector (max index + 1)."""
        counts = {n: 0 for n in SLOT_NAMES}
        for g in self.gates:
            if g.is_symbolic:
                counts[g.param.name] = max(counts[g.param.name], g.param.index + 1)
        return counts

    @cached_property
    def _program(self) -> tuple:
        return tuple(_Op(g.kind, g.target, g.controls, g.control_bits, ROTATION_AXIS.get(g.kind))
                     for g in self.gates)

    def gate_angles(self, params: ParameterSet | None = None) -> np.ndarray:
        """Angle of every gate with slots substituted (0 for parameter-free gates)."""
        out = np.zeros(len(self.gates))
        for i, g in enumerate(self.gates):
            if g.param is None:
                continue
            if isinstance(g.param, Slot):
                if params is None:
                    raise BindingError(f"no parameters bound for {g.param}")
                vec = params[g.param.name]
                if g.param.index >= vec.size:
                    raise BindingError(f"{g.param} unresolved: {g.param.name} has {vec.size} entries")
                out[i] = vec[g.param.index]
            else:
                out[i] = g.param
        return out

    def bind(self, params: ParameterSet) -> "Circuit":
        """Copy of the circuit with every slot replaced by its literal value."""
        angles = self.gate_angles(params)
        gates = [GateSpec(g.kind, g.qubits, float(a), g.ctrl_state) if g.is_symbolic else g
                 for g, a in zip(self.gates, angles)]
        return Circuit(self.num_data_qubits, self.num_ancilla_qubits, gates)


# --------------------------------------------------------------------------
# simulation


def zero_batch(num_qubits: int, batch: int = 1) -> np.ndarray:
    psi = np.zeros((batch,) + (2,) * num_qubits, dtype=complex)
    psi.reshape(batch, -1)[:, 0] = 1.0
    return psi


def apply_op(psi: np.ndarray, op: _Op, angles) -> None:
    """Apply one compiled gate to a state batch; ``angles`` is a scalar or per-batch vector."""
    if op.axis is None:
        apply_x_batch(psi, op.target, op.controls, op.bits)
        return
    i0, i1 = pair_index(psi.ndim - 1, op.target, op.controls, op.bits)
    apply_pair(psi, i0, i1, rotation_entries(op.axis, angles))


def simulate_angles(circuit: Circuit, angles: np.ndarray, psi: np.ndarray | None = None) -> np.ndarray:
    """Run ``circuit`` for each row of ``angles`` (shape ``(B, G)``); returns the state batch."""
    angles = np.atleast_2d(angles)
    if psi is None:
        psi = zero_batch(circuit.num_qubits, angles.shape[0])
    for g, op in enumerate(circuit._program):
        col = angles[:, g]
        apply_op(psi, op, col[0] if op.axis is not None and np.all(col == col[0]) else col)
    return psi


def run(circuit: Circuit, params: ParameterSet | None = None) -> StateVector:
    """Apply ``circuit`` to ``|0...0>`` with slots substituted from ``params``."""
    psi = simulate_angles(circuit, circuit.gate_angles(params)[None, :])
    return StateVector(circuit.num_qubits, psi)


# --------------------------------------------------------------------------
# layouts and builders


@dataclass(frozen=True)
class AnsatzLayout:
    n: int
    m: int
    num_latents: int | None = None
    prior_layers: int = 1
    likelihood_layers: int = 1
    control_style: str = PER_LATENT_STATE

    def __post_init__(self):
        if self.num_latents is None:
            object.__setattr__(self, "num_latents", 2 ** self.m)
        if self.n < 1 or self.m < 0:
            raise ValidationError(f"need n >= 1 and m >= 0, got n={self.n}, m={self.m}")
        if not 1 <= self.num_latents <= 2 ** self.m:
            raise CapacityError(f"num_latents={self.num_latents} must lie in [1, 2^m={2 ** self.m}]")
        if self.prior_layers < 1 or self.likelihood_layers < 1:
            raise ValidationError("layer counts must be >= 1")
        if self.control_style not in (PER_LATENT_STATE, PER_ANCILLA_QUBIT):
            raise ValidationError(f"unknown control_style {self.control_style!r}")

    @property
    def ancillas(self) -> range:
        return range(self.n, self.n + self.m)

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "num_latents": self.num_latents,
                "prior_layers": self.prior_layers, "likelihood_layers": self.likelihood_layers,
                "control_style": self.control_style}


def latent_bits(index: int, m: int) -> tuple:
    """Binary encoding of a latent index over ``m`` ancillas, most significant first."""
    return tuple((index >> (m - 1 - k)) & 1 for k in range(m))


def build_prior_ansatz(layout: AnsatzLayout) -> Circuit:
    """Trainable prior blocks: per layer, RY(gamma) on every ancilla then a CNOT chain."""
    gates, m = [], layout.m
    for j in range(layout.prior_layers):
        for k, a in enumerate(layout.ancillas):
            gates.append(GateSpec(RY, (a,), Slot("gamma", j * m + k)))
        for a in layout.ancillas[:-1]:
            gates.append(GateSpec(CNOT, (a, a + 1)))
    return Circuit(layout.n, m, gates)


def build_prior_exact(prior, m: int, n: int = 0) -> Circuit:
    """Binary rotation tree preparing ``sum_i sqrt(prior_i) |lambda_i>`` on the ancillas.

    Level ``k`` rotates ancilla ``k`` conditioned on the ``k`` more significant
    ancillas equal to each prefix. Prefixes with zero mass get no gate, so
    padding states beyond ``len(prior)`` keep amplitude exactly zero.
    """
    p = np.asarray(prior, dtype=float).reshape(-1)
    if p.size > 2 ** m:
        raise CapacityError(f"{p.size} latent states do not fit in {m} ancilla qubits")
    if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
        raise ValidationError("prior must be nonnegative and sum to 1")
    full = np.zeros(2 ** m)
    full[: p.size] = p
    gates = []
    for level in range(m):
        # mass of each (level+1)-bit prefix
        mass = full.reshape(2 ** (level + 1), -1).sum(axis=1)
        for prefix in range(2 ** level):
            m0, m1 = mass[2 * prefix], mass[2 * prefix + 1]
            if m1 <= 0.0:
                continue
            angle = 2.0 * np.arctan2(np.sqrt(m1), np.sqrt(m0))
            target = n + level
            if level == 0:
                gates.append(GateSpec(RY, (target,), angle))
            else:
                ctrl = tuple(range(n, n + level))
                gates.append(GateSpec(MULTI_CTRL_RY, ctrl + (target,), angle, latent_bits(prefix, level)))
    return Circuit(n, m, gates)


def build_likelihood_ansatz(layout: AnsatzLayout) -> Circuit:
    """Ancilla-controlled likelihood blocks acting on the data qubits.

    ``PER_LATENT_STATE``: one RY per (layer, latent, data qubit), controlled on
    the whole ancilla register equalling that latent. ``PER_ANCILLA_QUBIT``:
    one CRY per (layer, ancilla, data qubit) followed by a single Toffoli whose
    two ancilla controls and data target cycle with the layer (omitted when
    ``m < 2``).
    """
    n, m, K = layout.n, layout.m, layout.num_latents
    if m < 1:
        raise ValidationError("likelihood blocks need at least one ancilla qubit")
    anc = tuple(layout.ancillas)
    gates = []
    for layer in range(layout.likelihood_layers):
        if layout.control_style == PER_LATENT_STATE:
            for i in range(K):
                bits = latent_bits(i, m)
                for q in range(n):
                    slot = Slot("theta", (layer * K + i) * n + q)
                    gates.append(GateSpec(MULTI_CTRL_RY, anc + (q,), slot, bits))
        else:
            for k, a in enumerate(anc):
                for q in range(n):
                    gates.append(GateSpec(CRY, (a, q), Slot("theta", (layer * m + k) * n + q)))
            if m >= 2:
                gates.append(GateSpec(TOFFOLI, (anc[layer % m], anc[(layer + 1) % m], layer % n)))
    return Circuit(n, m, gates)


def build_qcbm_baseline(n: int, layers: int) -> Circuit:
    """No-ancilla baseline: per layer RY and RZ on every qubit, then a CNOT chain."""
    if n < 1 or layers < 1:
        raise ValidationError("need n >= 1 and layers >= 1")
    gates = []
    for layer in range(layers):
        for q in range(n):
            base = 2 * (layer * n + q)
            gates.append(GateSpec(RY, (q,), Slot("theta", base)))
            gates.append(GateSpec(RZ, (q,), Slot("theta", base + 1)))
        for q in range(n - 1):
            gates.append(GateSpec(CNOT, (q, q + 1)))
    return Circuit(n, 0, gates)


def build_bqc(layout: AnsatzLayout, prior=None) -> Circuit:
    """Full BQC: exact prior preparation when ``prior`` is given, else trainable prior blocks."""
    if prior is None:
        head = build_prior_ansatz(layout)
    else:
        head = build_prior_exact(prior, layout.m, layout.n)
    return head + build_likelihood_ansatz(layout)


def basis_prep(index: int, n: int, m: int) -> Circuit:
    """X gates clamping the ancilla register to ``|lambda_index>``."""
    bits = latent_bits(index, m)
    return Circuit(n, m, [GateSpec(X, (n + k,)) for k, b in enumerate(bits) if b])


# --------------------------------------------------------------------------
# text serialization

_HEADER = re.compile(r"^CIRCUIT\s+n=(\d+)\s+m=(\d+)$")
_SLOT = re.compile(r"^slot:(\w+)\[(\d+)\]$")


def format_gate(g: GateSpec) -> str:
    parts = [g.kind, ",".join(str(q) for q in g.qubits)]
    if g.param is not None:
        parts.append(str(g.param) if g.is_symbolic else repr(g.param))
    if g.kind == MULTI_CTRL_RY:
        parts.append("ctrl=" + "".join(str(b) for b in g.ctrl_state))
    return " ".join(parts)


def parse_gate(line: str) -> GateSpec:
    tokens = line.split()
    if len(tokens) < 2:
        raise ValidationError(f"malformed gate line {line!r}")
    kind, qubits = tokens[0], tuple(int(q) for q in tokens[1].split(","))
    param, ctrl = None, None
    for tok in tokens[2:]:
        if tok.startswith("ctrl="):
            ctrl = tuple(int(b) for b in tok[5:])
        elif (mt := _SLOT.match(tok)):
            param = Slot(mt.group(1), int(mt.group(2)))
        else:
            try:
                param = float(tok)
            except ValueError:
                raise ValidationError(f"bad parameter token {tok!r} in {line!r}") from None
    return GateSpec(kind, qubits, param, ctrl)


def dumps(circuit: Circuit) -> str:
    """One header line, then ``KIND q0,q1,... [param|slot:name[i]] [ctrl=bits]`` per gate."""
    lines = [f"CIRCUIT n={circuit.num_data_qubits} m={circuit.num_ancilla_qubits}"]
    lines += [format_gate(g) for g in circuit.gates]
    return "\n".join(lines) + "\n"


def loads(text: str) -> Circuit:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not (mh := _HEADER.match(lines[0])):
        raise ValidationError("circuit text must start with 'CIRCUIT n=<n> m=<m>'")
    return Circuit(int(mh.group(1)), int(mh.group(2)), [parse_gate(ln) for ln in lines[1:]])


# --------------------------------------------------------------------------
# decomposition into single-qubit rotations and CNOT


def _cry_parts(control: int, target: int, theta: float) -> list:
    return [GateSpec(RY, (target,), theta / 2), GateSpec(CNOT, (control, target)),
            GateSpec(RY, (target,), -theta / 2), GateSpec(CNOT, (control, target))]


def _toffoli_parts(c1: int, c2: int, t: int) -> list:
    def h(q):  # H = RY(pi/2) RZ(pi) up to phase
        return [GateSpec(RZ, (q,), np.pi), GateSpec(RY, (q,), np.pi / 2)]

    def tg(q, sign=1):  # T = RZ(pi/4) up to phase
        return [GateSpec(RZ, (q,), sign * np.pi / 4)]

    def cx(a, b):
        return [GateSpec(CNOT, (a, b))]

    return (h(t) + cx(c2, t) + tg(t, -1) + cx(c1, t) + tg(t) + cx(c2, t) + tg(t, -1)
            + cx(c1, t) + tg(c2) + tg(t) + h(t) + cx(c1, c2) + tg(c1) + tg(c2, -1) + cx(c1, c2))


def _mcry_parts(controls: Sequence[int], bits: Sequence[int], target: int, theta: float) -> list:
    # Gray-code style V/V^dagger expansion: for every nonempty control subset S,
    # rotate by +-theta/2^(k-1) conditioned on the parity of S; the signed sum
    # equals theta exactly when all controls are set and 0 otherwise.
    k = len(controls)
    flips = [GateSpec(RX, (c,), np.pi) for c, b in zip(controls, bits) if b == 0]
    if k == 1:
        return flips + _cry_parts(controls[0], target, theta) + flips
    phi = theta / 2 ** (k - 1)
    body = []
    for size in range(1, k + 1):
        sign = 1 if size % 2 else -1
        for subset in itertools.combinations(controls, size):
            pivot, rest = subset[-1], subset[:-1]
            parity = [GateSpec(CNOT, (c, pivot)) for c in rest]
            body += parity + _cry_parts(pivot, target, sign * phi) + parity[::-1]
    return flips + body + flips


def decompose(gate: GateSpec) -> list:
    """Rewrite CRY, TOFFOLI or MULTI_CTRL_RY using single-qubit rotations and CNOT.

    Equivalence holds up to a global phase (Toffoli's H/T rotations and the
    RX(pi) flips of zero-controls each carry one).
    """
    if gate.kind not in (CRY, TOFFOLI, MULTI_CTRL_RY):
        raise ValidationError(f"cannot decompose {gate.kind}")
    if gate.is_symbolic:
        raise BindingError("bind parameters before decomposing")
    if gate.kind == CRY:
        return _cry_parts(gate.qubits[0], gate.qubits[1], gate.param)
    if gate.kind == TOFFOLI:
        return _toffoli_parts(*gate.qubits)
    return _mcry_parts(gate.controls, gate.ctrl_state, gate.target, gate.param)


def decompose_circuit(circuit: Circuit) -> Circuit:
    gates = []
    for g in circuit.gates:
        gates += decompose(g) if g.kind in (CRY, TOFFOLI, MULTI_CTRL_RY) else [g]
    return Circuit(circuit.num_data_qubits, circuit.num_ancilla_qubits, gates)


__all__ = [
    "AnsatzLayout", "Circuit", "GateSpec", "ParameterSet", "Slot",
    "RX", "RY", "RZ", "X", "CNOT", "CRY", "TOFFOLI", "MULTI_CTRL_RY",
    "PER_LATENT_STATE", "PER_ANCILLA_QUBIT",
    "basis_prep", "build_bqc", "build_likelihood_ansatz", "build_prior_ansatz",
    "build_prior_exact", "build_qcbm_baseline", "decompose", "decompose_circuit",
    "dumps", "loads", "latent_bits", "run", "simulate_angles",
]
