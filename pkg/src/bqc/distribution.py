"""Normalized probability vectors over basis-state indices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

NORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Probability vector; entry ``i`` is the probability of outcome ``i``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValidationError("probabilities must be a nonempty 1-D vector")
        if np.any(p < -NORM_TOL) or not np.all(np.isfinite(p)):
            raise ValidationError("probabilities must be finite and nonnegative")
        total = p.sum()
        if abs(total - 1.0) > NORM_TOL:
            raise ValidationError(f"probabilities sum to {total!r}, expected 1")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def support_size(self) -> int:
        return self.probs.size

    def __len__(self):
        return self.probs.size

    def __getitem__(self, i):
        return self.probs[i]

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __repr__(self):
        return f"DiscreteDistribution({np.array2string(self.probs, precision=4)})"

    def support(self, atol: float = 0.0) -> np.ndarray:
        """Indices carrying probability strictly above ``atol``."""
        return np.flatnonzero(self.probs > atol)

    @classmethod
    def from_counts(cls, counts, size: int) -> "DiscreteDistribution":
        p = np.zeros(size)
        for k, v in counts.items():
            p[k] = v
        return cls(p / p.sum())


def total_variation(p, q) -> float:
    """Half the L1 distance between two distributions of equal length."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValidationError(f"support mismatch: {p.shape} vs {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())
