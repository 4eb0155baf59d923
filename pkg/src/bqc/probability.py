"""Prior, likelihood, joint and posterior distributions read off a simulated state.

Every quantity is a marginal or a ratio of marginals of the squared amplitudes:
projecting onto a set of basis states and taking the squared norm is the same
as summing ``|alpha|^2`` over that set, so no projector is ever built here.

The flat joint index for data outcome ``x`` and latent ``lam`` is
``x * 2**m + lam`` because data qubits are the most significant.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distribution import DiscreteDistribution, total_variation
from .errors import ConditioningError, ValidationError
from .statevector import StateVector

CONDITION_TOL = 1e-12


@dataclass(frozen=True)
class RegisterSplit:
    n: int
    m: int = 0

    def __post_init__(self):
        if self.n < 1 or self.m < 0:
            raise ValidationError(f"need n >= 1 and m >= 0, got {self.n}, {self.m}")

    @property
    def num_qubits(self) -> int:
        return self.n + self.m


def _squared(state) -> np.ndarray:
    a = state.amplitudes if isinstance(state, StateVector) else np.asarray(state).reshape(-1)
    p = a.real ** 2 + a.imag ** 2
    return p / p.sum()


def joint_table(state, split: RegisterSplit) -> np.ndarray:
    """``J[x, lam] = P(x, lam)`` as a ``(2^n, 2^m)`` array."""
    p = _squared(state)
    if p.size != 2 ** split.num_qubits:
        raise ValidationError(f"split n={split.n}, m={split.m} does not match a {p.size}-amplitude state")
    return p.reshape(2 ** split.n, 2 ** split.m)


def joint(state, split: RegisterSplit) -> DiscreteDistribution:
    return DiscreteDistribution(joint_table(state, split).reshape(-1))


def prior(state, split: RegisterSplit) -> DiscreteDistribution:
    if split.m == 0:
        raise ValidationError("no ancilla qubits: the state carries no prior")
    return DiscreteDistribution(joint_table(state, split).sum(axis=0))


def data_marginal(state, split: RegisterSplit) -> DiscreteDistribution:
    return DiscreteDistribution(joint_table(state, split).sum(axis=1))


def likelihood(state, split: RegisterSplit, lambda_index: int) -> DiscreteDistribution:
    """``P(x | lam = lambda_index)``."""
    J = joint_table(state, split)
    if not 0 <= lambda_index < J.shape[1]:
        raise IndexError(f"latent index {lambda_index} out of range")
    col = J[:, lambda_index]
    mass = col.sum()
    if mass <= CONDITION_TOL:
        raise ConditioningError(f"P(lambda={lambda_index}) = {mass:.3g} is zero")
    return DiscreteDistribution(col / mass)


def posterior(state, split: RegisterSplit, x_index: int) -> DiscreteDistribution:
    """``P(lam | x = x_index)``."""
    J = joint_table(state, split)
    if not 0 <= x_index < J.shape[0]:
        raise IndexError(f"data index {x_index} out of range")
    row = J[x_index]
    mass = row.sum()
    if mass <= CONDITION_TOL:
        raise ConditioningError(f"P(x={x_index}) = {mass:.3g} is zero")
    return DiscreteDistribution(row / mass)


__all__ = [
    "CONDITION_TOL", "DiscreteDistribution", "RegisterSplit", "data_marginal",
    "joint", "joint_table", "likelihood", "posterior", "prior", "total_variation",
]
