"""Similarity kernels over unit-norm item embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError
from .validation import as_float_matrix, as_float_vector

KERNEL_FAMILIES = ("linear", "rbf")


@dataclass(frozen=True)
class KernelSpec:
    """Which similarity to use between two unit embeddings.

    ``linear`` is the plain inner product; ``rbf`` is
    ``exp(-||a - b||^2 / (2 * bandwidth^2))``. Both send identical unit
    vectors to exactly one.
    """

    family: str = "linear"
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise InvalidInputError(
                f"unknown kernel family {self.family!r}; pick one of {KERNEL_FAMILIES}"
            )
        if not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
            raise InvalidInputError(f"bandwidth must be positive, got {self.bandwidth}")


def kernel_eval(spec, a, b):
    """Kernel value between two single embeddings."""
    a = as_float_vector(a, "a")
    b = as_float_vector(b, "b")
    if a.shape != b.shape:
        raise InvalidInputError(f"embedding shapes differ: {a.shape} vs {b.shape}")
    return float(kernel_matrix(spec, a[None, :], b[None, :])[0, 0])


def kernel_matrix(spec, x, y):
    """Pairwise kernel values between the rows of ``x`` and the rows of ``y``."""
    x = as_float_matrix(x, "x")
    y = as_float_matrix(y, "y")
    if x.shape[1] != y.shape[1]:
        raise InvalidInputError(
            f"embedding dimensions differ: {x.shape[1]} vs {y.shape[1]}"
        )
    inner = x @ y.T
    if spec.family == "linear":
        return inner
    # ||a-b||^2 = ||a||^2 + ||b||^2 - 2 a.b ; rows live on the unit sphere but
    # we keep the exact norms so slightly-off inputs stay consistent.
    sq = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(y * y, axis=1)[None, :]
        - 2.0 * inner
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * spec.bandwidth**2))
