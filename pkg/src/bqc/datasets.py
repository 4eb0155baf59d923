"""Target distributions: bars-and-stripes images and discretized Gaussian mixtures.

Images are encoded row-major with the top-left pixel as the most significant
bit, so pixel ``(r, c)`` of a ``rows x cols`` grid is qubit ``r * cols + c``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .distribution import DiscreteDistribution
from .errors import ValidationError
from .statevector import MAX_QUBITS


@dataclass(frozen=True)
class BasGrid:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.rows * self.cols > MAX_QUBITS:
            raise ValidationError(f"invalid BAS grid {self.rows}x{self.cols}")

    @property
    def num_pixels(self) -> int:
        return self.rows * self.cols


def encode_image(image) -> int:
    bits = np.asarray(image, dtype=int).reshape(-1)
    return int(bits @ (1 << np.arange(bits.size - 1, -1, -1)))


def decode_image(index: int, grid: BasGrid) -> np.ndarray:
    n = grid.num_pixels
    bits = (index >> np.arange(n - 1, -1, -1)) & 1
    return bits.reshape(grid.rows, grid.cols)


def bas_patterns(grid: BasGrid) -> list:
    """Sorted integer encodings of every bar and every stripe image."""
    r, c = grid.rows, grid.cols
    found = set()
    for col_bits in range(2 ** c):  # bars: each column constant
        row = [(col_bits >> (c - 1 - j)) & 1 for j in range(c)]
        found.add(encode_image([row] * r))
    for row_bits in range(2 ** r):  # stripes: each row constant
        found.add(encode_image([[(row_bits >> (r - 1 - i)) & 1] * c for i in range(r)]))
    return sorted(found)


def bas_target(grid: BasGrid) -> DiscreteDistribution:
    pats = bas_patterns(grid)
    p = np.zeros(2 ** grid.num_pixels)
    p[pats] = 1.0 / len(pats)
    return DiscreteDistribution(p)


def point_mass(index: int, size: int) -> DiscreteDistribution:
    p = np.zeros(size)
    p[index] = 1.0
    return DiscreteDistribution(p)


@dataclass(frozen=True)
class GaussianSpec:
    mean: float
    sigma: float
    num_qubits: int

    def __post_init__(self):
        if self.num_qubits < 1 or self.num_qubits > MAX_QUBITS:
            raise ValidationError(f"num_qubits out of range: {self.num_qubits}")
        if not 0 <= self.mean < 2 ** self.num_qubits:
            raise ValidationError(f"mean {self.mean} outside [0, 2^{self.num_qubits})")
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class MixtureSpec:
    components: tuple  # of (weight, GaussianSpec)

    def __post_init__(self):
        comps = tuple((float(w), g) for w, g in self.components)
        if not comps:
            raise ValidationError("mixture needs at least one component")
        ws = np.array([w for w, _ in comps])
        if np.any(ws < 0) or abs(ws.sum() - 1) > 1e-9:
            raise ValidationError(f"mixture weights {ws.tolist()} must be nonnegative and sum to 1")
        if len({g.num_qubits for _, g in comps}) != 1:
            raise ValidationError("mixture components must share num_qubits")
        object.__setattr__(self, "components", comps)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])


def discretized_gaussian(spec: GaussianSpec) -> DiscreteDistribution:
    """Gaussian density on the integers ``0 .. 2^n - 1``, truncated and renormalized."""
    x = np.arange(2 ** spec.num_qubits, dtype=float)
    logp = -((x - spec.mean) ** 2) / (2 * spec.sigma ** 2)
    p = np.exp(logp - logp.max())
    return DiscreteDistribution(p / p.sum())


def mixture_target(spec: MixtureSpec) -> DiscreteDistribution:
    p = sum(w * discretized_gaussian(g).probs for w, g in spec.components)
    return DiscreteDistribution(p / p.sum())


def write_distribution_csv(path, probs: Sequence[float] | DiscreteDistribution) -> None:
    """CSV with header ``index,probability``; floats are written with 17 significant digits."""
    p = np.asarray(probs, dtype=float)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "probability"])
        for i, v in enumerate(p):
            w.writerow([i, f"{v:.16e}"])


def read_distribution_csv(path) -> DiscreteDistribution:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    p = np.zeros(len(rows))
    for row in rows:
        p[int(row["index"])] = float(row["probability"])
    return DiscreteDistribution(p)
