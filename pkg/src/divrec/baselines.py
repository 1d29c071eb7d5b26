"""Reranking baselines: maximal marginal relevance and explicit subquery coverage.

Both follow their textbook greedy formulations. Similarities are kernel
values obtained through feature-row inner products, and every step rescans
the full candidate set, which is exactly the cost profile these baselines
are known for.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError
from .validation import (
    check_in_range,
    check_item_ids,
    check_positive_int,
    check_positive_vector,
)


@dataclass(frozen=True)
class RerankConfig:
    """Knobs shared by the rerankers.

    ``lam`` trades relevance against redundancy (1 = relevance only);
    ``alpha`` is the coverage threshold used by the subquery reranker.
    """

    lam: float = 0.5
    alpha: float = 0.0
    batch_size: int = 3

    def __post_init__(self):
        check_in_range(self.lam, 0.0, 1.0, "lam")
        check_in_range(self.alpha, -1.0, 1.0, "alpha")
        check_positive_int(self.batch_size, "batch_size")


def _top_quality(quality, batch_size, exclude=()):
    order = np.lexsort((np.arange(quality.shape[0]), -quality))
    if len(exclude):
        order = order[~np.isin(order, exclude)]
    return order[:batch_size].astype(np.int64)


def mmr_select(cfg, quality, feat, history=(), exclude=()):
    """Greedy maximal-marginal-relevance batch.

    Each step picks the item maximising ``lam * q_i`` minus ``(1 - lam)``
    times the largest similarity to anything already kept (history included).
    Ties break toward the lowest item id. ``exclude`` bars ids from selection
    without removing them from the penalty anchors.
    """
    quality = check_positive_vector(quality, "quality")
    n = feat.n_items_
    if quality.shape[0] != n:
        raise InvalidInputError(f"quality has length {quality.shape[0]}, expected {n}")
    history = check_item_ids(history, n, "history")
    exclude = check_item_ids(exclude, n, "exclude")
    batch_size = cfg.batch_size
    if batch_size > n - np.unique(exclude).size:
        raise InvalidInputError(f"batch_size {batch_size} exceeds the "
                                f"{n - np.unique(exclude).size} selectable items")

    rows = feat.matrix_
    selected = []
    for _ in range(batch_size):
        anchor_ids = np.concatenate([history, np.asarray(selected, dtype=np.int64)])
        if anchor_ids.size:
            penalty = (rows @ rows[anchor_ids].T).max(axis=1)
        else:
            penalty = np.zeros(n)
        scores = cfg.lam * quality - (1.0 - cfg.lam) * penalty
        scores[exclude] = -np.inf
        scores[selected] = -np.inf
        selected.append(int(np.argmax(scores)))
    return np.asarray(selected, dtype=np.int64)


def xquad_select(cfg, quality, feat, index, history=(), exclude=()):
    """Greedy subquery-coverage batch.

    Every history item spawns one equally-weighted subquery; an item covers a
    subquery when their cosine reaches ``alpha``. Steps reward covering
    subqueries nothing selected so far has touched. With no history this
    degenerates to a plain quality ranking. ``exclude`` bars ids from
    selection while leaving the subqueries themselves intact.
    """
    quality = check_positive_vector(quality, "quality")
    n = feat.n_items_
    if quality.shape[0] != n:
        raise InvalidInputError(f"quality has length {quality.shape[0]}, expected {n}")
    history = np.unique(check_item_ids(history, n, "history"))
    exclude = check_item_ids(exclude, n, "exclude")
    batch_size = cfg.batch_size
    if batch_size > n - np.unique(exclude).size:
        raise InvalidInputError(f"batch_size {batch_size} exceeds the "
                                f"{n - np.unique(exclude).size} selectable items")
    if history.size == 0:
        return _top_quality(quality, batch_size, exclude)

    cosines = index.vectors @ index.vectors[history].T  # (n, |H|)
    covers = cosines >= cfg.alpha
    weight = 1.0 / history.size
    uncovered = np.ones(history.size)  # product of (1 - cover_j) over selections
    selected = []
    for _ in range(batch_size):
        gain = cfg.lam * quality + (1.0 - cfg.lam) * weight * (covers @ uncovered)
        gain[exclude] = -np.inf
        gain[selected] = -np.inf
        pick = int(np.argmax(gain))
        selected.append(pick)
        uncovered *= 1.0 - covers[pick].astype(np.float64)
    return np.asarray(selected, dtype=np.int64)
