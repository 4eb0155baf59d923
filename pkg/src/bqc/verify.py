"""Fast self-checks behind ``bqc verify``; each returns ``(name, ok, detail)``.

Everything is seeded, so two runs print the same lines.
"""
from __future__ import annotations

import numpy as np

from .circuits import (
    CRY,
    MULTI_CTRL_RY,
    PER_ANCILLA_QUBIT,
    PER_LATENT_STATE,
    TOFFOLI,
    AnsatzLayout,
    Circuit,
    GateSpec,
    ParameterSet,
    build_bqc,
    decompose,
    simulate_angles,
)
from .datasets import BasGrid, bas_patterns
from .loss import gradient_adjoint, gradient_fd, gradient_shift
from .probability import RegisterSplit, joint_table, likelihood, prior
from .statevector import StateVector, apply_controlled, ry

SEED = 1234


def _random_amplitudes(n, rng):
    a = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return a / np.linalg.norm(a)


def _run_on(circuit: Circuit, amplitudes) -> np.ndarray:
    psi = np.array(amplitudes, dtype=complex).reshape((1,) + (2,) * circuit.num_qubits)
    return simulate_angles(circuit, circuit.gate_angles()[None, :], psi).reshape(-1)


def check_norms():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(20):
        s = StateVector.from_amplitudes(_random_amplitudes(5, rng))
        for _ in range(30):
            t = int(rng.integers(5))
            ctrls = [(int(q), int(rng.integers(2))) for q in rng.choice([q for q in range(5) if q != t],
                                                                        size=int(rng.integers(0, 3)), replace=False)]
            apply_controlled(s, ry(rng.uniform(-np.pi, np.pi)), ctrls, t)
        worst = max(worst, abs(s.norm_squared() - 1))
    return "norm preservation", worst <= 1e-10, f"max |norm^2 - 1| = {worst:.1e}"


def check_gradients():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for style in (PER_LATENT_STATE, PER_ANCILLA_QUBIT):
        lay = AnsatzLayout(n=2, m=1, likelihood_layers=2, control_style=style)
        c = build_bqc(lay)
        counts = c.slot_counts()
        target = rng.dirichlet(np.ones(4))
        for trainable in ("gamma", "theta"):
            p = ParameterSet(rng.uniform(-np.pi, np.pi, counts["gamma"]), rng.uniform(-np.pi, np.pi, counts["theta"]),
                             gamma_frozen=trainable != "gamma", theta_frozen=trainable != "theta")
            fd = gradient_fd(c, p, target).gradient
            worst = max(worst, np.abs(gradient_shift(c, p, target).gradient - fd).max(),
                        np.abs(gradient_adjoint(c, p, target).gradient - fd).max())
    return "gradient agreement (3 qubits)", worst <= 1e-6, f"max |analytic - fd| = {worst:.1e}"


def _phase_distance(a, b) -> float:
    k = np.argmax(np.abs(b))
    phase = a[k] / b[k]
    return float(max(abs(abs(phase) - 1), np.abs(a - phase * b).max()))


def check_decompositions():
    rng = np.random.default_rng(SEED)
    gates = [GateSpec(CRY, (0, 2), 1.234), GateSpec(TOFFOLI, (2, 0, 1)),
             GateSpec(MULTI_CTRL_RY, (1, 3, 0), -0.77, (1, 0)),
             GateSpec(MULTI_CTRL_RY, (0, 1, 2, 3), 2.1, (0, 1, 1))]
    worst = 0.0
    for g in gates:
        native, parts = Circuit(4, 0, [g]), Circuit(4, 0, decompose(g))
        for _ in range(25):
            a = _random_amplitudes(4, rng)
            worst = max(worst, _phase_distance(_run_on(parts, a), _run_on(native, a)))
    return "decomposition equivalence", worst <= 1e-10, f"max amplitude deviation = {worst:.1e}"


def check_bas_counts():
    bad = [(r, c) for r in range(1, 5) for c in range(1, 5)
           if len(bas_patterns(BasGrid(r, c))) != 2 ** r + 2 ** c - 2]
    return "BAS pattern counts", not bad, f"wrong grids: {bad}" if bad else ""


def check_chain_rule():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(50):
        s = StateVector.from_amplitudes(_random_amplitudes(4, rng))
        split = RegisterSplit(2, 2)
        J, pri = joint_table(s, split), prior(s, split).probs
        for i in range(4):
            worst = max(worst, np.abs(J[:, i] - pri[i] * likelihood(s, split, i).probs).max())
    return "chain rule", worst <= 1e-10, f"max deviation = {worst:.1e}"


CHECKS = (check_norms, check_gradients, check_decompositions, check_bas_counts, check_chain_rule)


def run_checks() -> list:
    out = []
    for check in CHECKS:
        try:
            out.append(check())
        except Exception as exc:  # a crashing check is a failing check
            out.append((check.__name__, False, f"{type(exc).__name__}: {exc}"))
    return out
