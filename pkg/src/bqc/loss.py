"""Squared MMD loss and its gradients with respect to circuit angles.

The loss is the kernel quadratic form ``(p - f)^T K (p - f)``, which is the
squared RKHS distance between the two kernel mean embeddings; the feature map
is never built.

Three gradient routes share one interface and must agree:

* :func:`gradient_shift` evaluates shifted circuits. Uncontrolled rotations
  use the two-term ``+-pi/2`` rule. Controlled rotations have generator
  eigenvalues ``{0, +-1/2}`` and need the four-term rule with shifts
  ``+-pi/2`` and ``+-3pi/2``; the plain two-term rule is biased for them.
* :func:`gradient_adjoint` back-propagates through the state vector; exact,
  and the cheapest route for exact-probability training.
* :func:`gradient_fd` uses central finite differences; test oracle only.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .circuits import MULTI_CTRL_RY, CRY, Circuit, ParameterSet, Slot, simulate_angles, zero_batch
from .distribution import DiscreteDistribution
from .errors import ConfigurationError, ValidationError
from .probability import CONDITION_TOL, RegisterSplit
from .statevector import EXACT, apply_pair, pair_index, rotation_derivative_entries, rotation_entries, \
    sample_probs, swap_pair

DEFAULT_BANDWIDTHS = (0.25, 4.0, 16.0)
MAX_DOMAIN = 2 ** 14
# Keep batched shift evaluations under ~2^22 amplitudes (64 MiB) per chunk.
_BATCH_AMPLITUDES = 2 ** 22

_S2 = np.sqrt(2.0)
_FOUR_TERM = ((np.pi / 2, (_S2 + 1) / (4 * _S2)), (-np.pi / 2, -(_S2 + 1) / (4 * _S2)),
              (3 * np.pi / 2, -(_S2 - 1) / (4 * _S2)), (-3 * np.pi / 2, (_S2 - 1) / (4 * _S2)))
_TWO_TERM = ((np.pi / 2, 0.5), (-np.pi / 2, -0.5))


@dataclass(frozen=True)
class KernelSpec:
    """Equal-weight mixture of Gaussian kernels.

    ``bandwidths`` are kernel variances in squared distance units. ``metric``
    is ``"index"`` (distance between integer labels) or ``"hamming"``.
    """

    bandwidths: tuple = DEFAULT_BANDWIDTHS
    metric: str = "index"

    def __post_init__(self):
        bw = tuple(float(b) for b in self.bandwidths)
        if not bw or any(not b > 0 for b in bw):
            raise ValidationError(f"bandwidths must be a nonempty list of positive numbers: {self.bandwidths!r}")
        if self.metric not in ("index", "hamming"):
            raise ValidationError(f"unknown kernel metric {self.metric!r}")
        object.__setattr__(self, "bandwidths", bw)

    def to_dict(self) -> dict:
        return {"bandwidths": list(self.bandwidths), "metric": self.metric}


@dataclass
class LossValue:
    value: float
    gradient: np.ndarray | None = None


@lru_cache(maxsize=16)
def _kernel(bandwidths: tuple, metric: str, size: int) -> np.ndarray:
    x = np.arange(size)
    if metric == "hamming":
        xor = x[:, None] ^ x[None, :]
        d2 = np.zeros((size, size))
        while xor.any():
            d2 += xor & 1
            xor = xor >> 1
        d2 = d2 ** 2
    else:
        d2 = (x[:, None] - x[None, :]).astype(float) ** 2
    K = sum(np.exp(-d2 / (2 * b)) for b in bandwidths) / len(bandwidths)
    K.setflags(write=False)
    return K


def kernel_matrix(spec: KernelSpec, domain_size: int) -> np.ndarray:
    """``K[x, y] = mean_k exp(-d(x, y)^2 / (2 sigma_k^2))``."""
    if not 1 <= domain_size <= MAX_DOMAIN:
        raise ValidationError(f"domain_size must lie in [1, {MAX_DOMAIN}]")
    return _kernel(spec.bandwidths, spec.metric, int(domain_size))


def mmd(p, f, spec: KernelSpec = KernelSpec()) -> LossValue:
    p = np.asarray(p, dtype=float)
    f = np.asarray(f, dtype=float)
    if p.shape != f.shape or p.ndim != 1:
        raise ValidationError(f"support mismatch: {p.shape} vs {f.shape}")
    d = p - f
    return LossValue(float(d @ kernel_matrix(spec, d.size) @ d))


# --------------------------------------------------------------------------
# objectives on the joint table J[x, lam]


@dataclass(frozen=True)
class ConditionalTarget:
    """One data-register target per latent: loss is ``sum_i P(lam_i) * mmd(P(.|lam_i), target_i)``."""

    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(
            c if isinstance(c, DiscreteDistribution) else DiscreteDistribution(c) for c in self.components))


class MarginalObjective:
    """MMD between the data marginal and a target."""

    def __init__(self, target, spec: KernelSpec, split: RegisterSplit):
        self.target = np.asarray(target, dtype=float)
        if self.target.size != 2 ** split.n:
            raise ValidationError(f"target has {self.target.size} entries, data register needs {2 ** split.n}")
        self.K = kernel_matrix(spec, self.target.size)
        self.split = split

    def value(self, J: np.ndarray) -> float:
        d = J.sum(axis=-1) - self.target
        return float(d @ self.K @ d)

    def grad(self, J: np.ndarray) -> np.ndarray:
        d = J.sum(axis=-1) - self.target
        return np.repeat((2.0 * self.K @ d)[:, None], J.shape[-1], axis=1)


class ConditionalObjective:
    """Prior-weighted MMD between each latent's conditional and its own target.

    With ``e_i = J[:, i] - pi_i t_i`` the loss is ``sum_i e_i^T K e_i / pi_i``.
    """

    def __init__(self, target: ConditionalTarget, spec: KernelSpec, split: RegisterSplit):
        comps = target.components
        if len(comps) > 2 ** split.m or split.m == 0:
            raise ValidationError(f"{len(comps)} conditional targets for {split.m} ancilla qubits")
        if any(c.support_size != 2 ** split.n for c in comps):
            raise ValidationError("conditional targets must cover the data register")
        self.T = np.stack([c.probs for c in comps], axis=1)
        self.K = kernel_matrix(spec, 2 ** split.n)
        self.split = split

    def _parts(self, J):
        k = self.T.shape[1]
        pi = J[:, :k].sum(axis=0)
        live = pi > CONDITION_TOL
        E = J[:, :k] - pi * self.T
        KE = self.K @ E
        q = np.einsum("xi,xi->i", E, KE)
        return pi, live, E, KE, q

    def value(self, J: np.ndarray) -> float:
        pi, live, _, _, q = self._parts(J)
        return float(np.sum(q[live] / pi[live]))

    def grad(self, J: np.ndarray) -> np.ndarray:
        pi, live, _, KE, q = self._parts(J)
        k = self.T.shape[1]
        G = np.zeros_like(J)
        # d e_i / d J[x, i] = delta_x - t_i  (pi_i depends on the whole column)
        tKE = np.einsum("xi,xi->i", self.T, KE)
        with np.errstate(divide="ignore", invalid="ignore"):
            Gk = (2.0 * (KE - tKE) / pi) - q / pi ** 2
        G[:, :k] = np.where(live, Gk, 0.0)
        return G


def make_objective(target, spec: KernelSpec, split: RegisterSplit):
    if isinstance(target, ConditionalTarget):
        return ConditionalObjective(target, spec, split)
    return MarginalObjective(target, spec, split)


# --------------------------------------------------------------------------
# helpers


def _joint_from_states(psi: np.ndarray, split: RegisterSplit) -> np.ndarray:
    B = psi.shape[0]
    p = (psi.real ** 2 + psi.imag ** 2).reshape(B, 2 ** split.n, 2 ** split.m)
    return p / p.sum(axis=(1, 2), keepdims=True)


def _sampled(J: np.ndarray, shots, rng) -> np.ndarray:
    if shots == EXACT:
        return J
    out = np.empty_like(J)
    for b in range(J.shape[0]):
        out[b] = sample_probs(J[b].reshape(-1), shots, rng).reshape(J.shape[1:]) / shots
    return out


def _check_shots(shots):
    if shots != EXACT and (isinstance(shots, bool) or not isinstance(shots, (int, np.integer)) or shots < 1):
        raise ValidationError(f"shots must be a positive integer or EXACT, got {shots!r}")


def _split_for(circuit: Circuit, split: RegisterSplit | None) -> RegisterSplit:
    if split is None:
        return RegisterSplit(circuit.num_data_qubits, circuit.num_ancilla_qubits)
    if split.num_qubits != circuit.num_qubits:
        raise ValidationError("register split does not match the circuit")
    return split


def _trainable(circuit: Circuit, params: ParameterSet):
    try:
        name = params.trainable
    except ValidationError as exc:
        raise ConfigurationError(str(exc)) from None
    occ = [(g, gate.param.index, gate.kind in (CRY, MULTI_CTRL_RY))
           for g, gate in enumerate(circuit.gates)
           if isinstance(gate.param, Slot) and gate.param.name == name]
    return name, occ


def evaluate_joint(circuit: Circuit, params: ParameterSet, split: RegisterSplit | None = None,
                   shots=EXACT, rng=None) -> np.ndarray:
    """Joint table ``J[x, lam]``, exact or estimated from ``shots`` samples."""
    split = _split_for(circuit, split)
    psi = simulate_angles(circuit, circuit.gate_angles(params)[None, :])
    return _sampled(_joint_from_states(psi, split), shots, rng)[0]


def loss_value(circuit: Circuit, params: ParameterSet, target, spec: KernelSpec = KernelSpec(),
               split: RegisterSplit | None = None) -> float:
    split = _split_for(circuit, split)
    return make_objective(target, spec, split).value(evaluate_joint(circuit, params, split))


# --------------------------------------------------------------------------
# gradient routes


def shift_gradient(circuit: Circuit, params: ParameterSet, objective, split: RegisterSplit,
                   shots=EXACT, rng=None) -> LossValue:
    """Parameter-shift gradient of ``objective`` (see module docstring)."""
    _check_shots(shots)
    if shots != EXACT and rng is None:
        raise ConfigurationError("shot-based gradients need an rng")
    name, occ = _trainable(circuit, params)
    base = circuit.gate_angles(params)
    rows, coeffs = [base], []
    for g, slot, controlled in occ:
        for shift, c in (_FOUR_TERM if controlled else _TWO_TERM):
            r = base.copy()
            r[g] += shift
            rows.append(r)
            coeffs.append((slot, c))
    angles = np.array(rows)
    chunk = max(1, _BATCH_AMPLITUDES // 2 ** circuit.num_qubits)
    J = np.concatenate([
        _sampled(_joint_from_states(simulate_angles(circuit, angles[i:i + chunk]), split), shots, rng)
        for i in range(0, len(rows), chunk)])
    gJ = objective.grad(J[0])
    contrib = np.einsum("bxl,xl->b", J[1:], gJ)
    grad = np.zeros(params[name].size)
    for (slot, c), v in zip(coeffs, contrib):
        grad[slot] += c * v
    return LossValue(objective.value(J[0]), grad)


def adjoint_gradient(circuit: Circuit, params: ParameterSet, objective, split: RegisterSplit) -> LossValue:
    """Exact gradient by reverse-mode sweep through the state vector."""
    name, occ = _trainable(circuit, params)
    trainable = {g: slot for g, slot, _ in occ}
    angles = circuit.gate_angles(params)
    psi = simulate_angles(circuit, angles[None, :])
    J = _joint_from_states(psi, split)[0]
    lam = objective.grad(J).reshape(psi.shape) * psi
    grad = np.zeros(params[name].size)
    nq = circuit.num_qubits
    for g in range(len(circuit.gates) - 1, -1, -1):
        op = circuit._program[g]
        i0, i1 = pair_index(nq, op.target, op.controls, op.bits)
        if op.axis is None:
            swap_pair(psi, i0, i1)
            swap_pair(lam, i0, i1)
            continue
        inv = rotation_entries(op.axis, -angles[g])
        apply_pair(psi, i0, i1, inv)
        if g in trainable:
            # <lam| dU |psi> restricted to the controlled subspace
            d00, d01, d10, d11 = rotation_derivative_entries(op.axis, angles[g])
            p0, p1 = psi[i0], psi[i1]
            v = np.vdot(lam[i0], d00 * p0 + d01 * p1) + np.vdot(lam[i1], d10 * p0 + d11 * p1)
            grad[trainable[g]] += 2.0 * v.real
        apply_pair(lam, i0, i1, inv)
    return LossValue(objective.value(J), grad)


def fd_gradient(circuit: Circuit, params: ParameterSet, objective, split: RegisterSplit,
                h: float = 1e-5) -> LossValue:
    """Central finite differences ``(L(t + h) - L(t - h)) / 2h`` per trainable slot."""
    if not 1e-7 <= h <= 1e-3:
        raise ValidationError(f"step h={h} outside [1e-7, 1e-3]")
    name, _ = _trainable(circuit, params)
    vec = params[name]

    def L(v):
        return objective.value(evaluate_joint(circuit, params.with_values(name, v), split))

    grad = np.zeros(vec.size)
    for k in range(vec.size):
        up, dn = vec.copy(), vec.copy()
        up[k] += h
        dn[k] -= h
        grad[k] = (L(up) - L(dn)) / (2 * h)
    return LossValue(L(vec), grad)


def gradient_shift(circuit: Circuit, params: ParameterSet, target, spec: KernelSpec = KernelSpec(),
                   split: RegisterSplit | None = None, *, shots=EXACT, seed: int = 0) -> LossValue:
    """MMD loss and parameter-shift gradient for the single unfrozen vector.

    ``target`` is a data-register distribution (marginal loss) or a
    :class:`ConditionalTarget`. With finite ``shots`` every shifted circuit is
    estimated from fresh samples drawn from ``default_rng(seed)``.
    """
    split = _split_for(circuit, split)
    rng = None if shots == EXACT else np.random.default_rng(seed)
    return shift_gradient(circuit, params, make_objective(target, spec, split), split, shots, rng)


def gradient_adjoint(circuit: Circuit, params: ParameterSet, target, spec: KernelSpec = KernelSpec(),
                     split: RegisterSplit | None = None) -> LossValue:
    split = _split_for(circuit, split)
    return adjoint_gradient(circuit, params, make_objective(target, spec, split), split)


def gradient_fd(circuit: Circuit, params: ParameterSet, target, spec: KernelSpec = KernelSpec(),
                split: RegisterSplit | None = None, h: float = 1e-5) -> LossValue:
    split = _split_for(circuit, split)
    return fd_gradient(circuit, params, make_objective(target, spec, split), split, h)
