"""Feedback models (what a user would think) and noise channels (what we observe).

Expected feedback is strictly positive by standing assumption; every channel
emits strictly positive observations, and identical ``(seed, round, slot)``
triples always reproduce the same draw.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    AssumptionViolationError,
    InvalidInputError,
    MissingScoreError,
)
from .validation import normalize_rows

logger = logging.getLogger(__name__)

NOISE_KINDS = ("none", "bernoulli12", "discrete_clinical", "rating")

#: Expected feedback is clamped into [FEEDBACK_MIN, 1] by the synthetic model.
FEEDBACK_MIN = 1e-9


@dataclass
class SyntheticLinearModel:
    """Affine-in-cosine preference: ``(x_i . c_u + 1) / 2`` clamped positive."""

    store: object
    contexts: np.ndarray

    kind = "synthetic_linear"

    def __post_init__(self):
        self.contexts = normalize_rows(self.contexts, "contexts")

    @property
    def n_users(self):
        return self.contexts.shape[0]

    @property
    def n_items(self):
        return self.store.n_items

    def expected(self, item_id, user_id):
        item = self.store.row(int(item_id))
        raw = (float(item @ self.contexts[int(user_id)]) + 1.0) / 2.0
        return float(np.clip(raw, FEEDBACK_MIN, 1.0))

    def expected_vector(self, user_id):
        context = self.contexts[int(user_id)]
        out = np.empty(self.store.n_items)
        for start, rows in self.store.iter_batches():
            out[start : start + rows.shape[0]] = (rows @ context + 1.0) / 2.0
        return np.clip(out, FEEDBACK_MIN, 1.0)


@dataclass
class PrecomputedMatrixModel:
    """Sparse user-item score table; asking for an absent pair is an error."""

    table: dict
    n_users: int
    n_items: int

    kind = "precomputed_matrix"

    def expected(self, item_id, user_id):
        key = (int(user_id), int(item_id))
        if key not in self.table:
            raise MissingScoreError(f"no score recorded for user/item pair {key}")
        return float(self.table[key])

    def expected_vector(self, user_id):
        user_id = int(user_id)
        out = np.empty(self.n_items)
        for item in range(self.n_items):
            out[item] = self.expected(item, user_id)
        return out

    def item_counts(self):
        """Number of recorded scores per item (popularity)."""
        counts = np.zeros(self.n_items, dtype=np.int64)
        for _, item in self.table:
            counts[item] += 1
        return counts


def expected_feedback(model, item_id, user_id):
    """Model-side expected feedback for one user-item pair."""
    value = model.expected(item_id, user_id)
    if not np.isfinite(value) or value <= 0:
        raise AssumptionViolationError(
            f"expected feedback must be strictly positive, got {value}"
        )
    return value


@dataclass(frozen=True)
class NoiseChannel:
    """How expected feedback is corrupted into an observation."""

    kind: str = "none"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InvalidInputError(
                f"unknown noise kind {self.kind!r}; pick one of {NOISE_KINDS}"
            )


def observe(channel, expected, round_index, slot):
    """One observed feedback value for a recommended slot.

    - ``none``: the expected value itself.
    - ``bernoulli12``: 2 with probability ``clip(expected, 0, 1)`` else 1.
    - ``discrete_clinical``: expected scores quantised onto {1, 2, 3}
      (failure / untested / success).
    - ``rating``: expected ratings quantised onto a 0-5 scale, then shifted
      by one so observations live in {1, ..., 6}.

    The random channels draw from a generator seeded by
    ``(channel seed, round, slot)``, so a rerun reproduces every observation.
    """
    expected = float(expected)
    if not np.isfinite(expected) or expected <= 0:
        raise AssumptionViolationError(
            f"expected feedback must be strictly positive, got {expected}"
        )
    round_index = int(round_index)
    slot = int(slot)
    if round_index < 0 or slot < 0:
        raise InvalidInputError("round and slot must be non-negative")

    if channel.kind == "none":
        return expected
    if channel.kind == "bernoulli12":
        p = min(max(expected, 0.0), 1.0)
        rng = np.random.default_rng((channel.seed, round_index, slot))
        return 2.0 if rng.random() < p else 1.0
    if channel.kind == "discrete_clinical":
        return float(np.clip(round(expected), 1, 3))
    # rating
    return float(np.clip(round(expected), 0, 5) + 1)
