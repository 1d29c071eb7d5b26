"""Batch selection on a likelihood factor: greedy log-det ascent and exact sampling.

Both entry points work purely on factor rows, so cost scales with the number
of items times the factor rank, never with a full item-by-item matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError, RankDeficientError
from .linalg import EIGEN_FLOOR, logdet_gram
from .validation import check_item_ids, check_positive_int, check_positive_vector

#: Marginal gains at or below this (relative to the largest diagonal) are
#: treated as a collapsed direction rather than a pickable item.
GAIN_FLOOR = 1e-12


@dataclass(frozen=True)
class Selection:
    """A chosen batch plus whether quality padding had to fill it out."""

    ids: np.ndarray
    rank_deficient: bool = False

    def __iter__(self):
        return iter(self.ids)

    def __len__(self):
        return len(self.ids)


def _quality_order(quality, exclude):
    """Item ids by descending quality, ties toward the lowest id."""
    n = quality.shape[0]
    order = np.lexsort((np.arange(n), -quality))
    mask = np.ones(n, dtype=bool)
    mask[exclude] = False
    return order[mask[order]]


def greedy_map(factor, batch_size):
    """Greedily maximise ``logdet`` of the selected likelihood block.

    Classic incremental-Cholesky ascent: each step costs one matrix-vector
    product against the factor rows. Items whose marginal gain collapses to
    zero are unpickable; if the factor runs out of rank before the batch is
    full, the remainder is padded with the best-quality leftovers and the
    selection is flagged ``rank_deficient``.
    """
    rows = factor.rows
    n = rows.shape[0]
    batch_size = check_positive_int(batch_size, "batch_size")
    if batch_size > n:
        raise InvalidInputError(f"batch_size {batch_size} exceeds {n} items")

    diag = np.einsum("ij,ij->i", rows, rows)
    tol = GAIN_FLOOR * max(1.0, float(diag.max(initial=0.0)))
    gains = diag.astype(np.float64)
    alive = gains > tol
    cross = np.empty((batch_size, n))
    selected = []

    for step in range(batch_size):
        masked = np.where(alive, gains, -np.inf)
        pick = int(np.argmax(masked))
        if not np.isfinite(masked[pick]) or masked[pick] <= tol:
            break
        selected.append(pick)
        alive[pick] = False
        if step == batch_size - 1:
            break
        root = np.sqrt(gains[pick])
        covar = rows @ rows[pick]
        if step:
            covar -= cross[:step].T @ cross[:step, pick]
        cross[step] = covar / root
        gains = gains - cross[step] ** 2

    if len(selected) < batch_size:
        pad = _quality_order(factor.quality, selected)
        needed = batch_size - len(selected)
        selected.extend(int(i) for i in pad[:needed])
        return Selection(np.asarray(selected, dtype=np.int64), rank_deficient=True)
    return Selection(np.asarray(selected, dtype=np.int64), rank_deficient=False)


# -- exact fixed-size sampling ----------------------------------------------


def _elementary_symmetric(values, size):
    """Table ``E[l, n]``: elementary symmetric polynomial of degree ``l``
    over the first ``n`` values."""
    n = values.shape[0]
    table = np.zeros((size + 1, n + 1))
    table[0] = 1.0
    for degree in range(1, size + 1):
        for upto in range(1, n + 1):
            table[degree, upto] = (
                table[degree, upto - 1]
                + values[upto - 1] * table[degree - 1, upto - 1]
            )
    return table


def _select_spectrum(values, size, rng):
    """Pick which eigenvectors participate, one Bernoulli per eigenvalue."""
    # Selection probabilities are scale-free, so normalise to dodge overflow.
    scaled = values / values.max()
    table = _elementary_symmetric(scaled, size)
    chosen = []
    remaining = size
    for idx in range(values.shape[0] - 1, -1, -1):
        if remaining == 0:
            break
        if idx + 1 == remaining:
            chosen.extend(range(idx, -1, -1))
            break
        marginal = scaled[idx] * table[remaining - 1, idx] / table[remaining, idx + 1]
        if rng.random() < marginal:
            chosen.append(idx)
            remaining -= 1
    return np.asarray(chosen, dtype=np.int64)


def _sample_projection(vectors, rng):
    """Draw ``k`` items from the projection determinantal process on ``vectors``."""
    v = vectors.copy()
    n = v.shape[0]
    picked = []
    while v.shape[1] > 0:
        probs = np.einsum("ij,ij->i", v, v)
        np.maximum(probs, 0.0, out=probs)
        probs /= probs.sum()
        item = int(rng.choice(n, p=probs))
        picked.append(item)
        if v.shape[1] == 1:
            break
        # Condition on the pick: remove the component that sees item, then
        # re-orthonormalise the rest.
        col = int(np.argmax(np.abs(v[item])))
        pivot = v[:, col].copy()
        v = np.delete(v, col, axis=1)
        v -= np.outer(pivot, v[item] / pivot[item])
        v, _ = np.linalg.qr(v)
    return np.asarray(picked, dtype=np.int64)


def sample_kdpp(factor, batch_size, seed=0):
    """Exact draw of a size-``batch_size`` batch with probability
    proportional to the determinant of its likelihood block.

    The spectrum comes from the small dual gram of the factor rows, so the
    expensive part is independent of the universe size. Raises
    :class:`RankDeficientError` when the factor cannot span the batch.
    """
    rows = factor.rows
    n = rows.shape[0]
    batch_size = check_positive_int(batch_size, "batch_size")
    if batch_size > n:
        raise InvalidInputError(f"batch_size {batch_size} exceeds {n} items")

    dual = rows.T @ rows
    dual = 0.5 * (dual + dual.T)
    vals, vecs = np.linalg.eigh(dual)
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    keep = vals > EIGEN_FLOOR * max(float(vals[0]), 0.0) if vals.size else vals > 0
    vals = vals[keep]
    vecs = vecs[:, keep]
    rank = int(vals.size)
    if rank < batch_size:
        raise RankDeficientError(
            f"factor rank {rank} cannot support batches of {batch_size}",
            rank=rank,
        )

    # Orthonormal eigenvectors of the likelihood, via the dual eigenvectors.
    eigenbasis = rows @ (vecs / np.sqrt(vals))

    rng = np.random.default_rng(seed)
    subset = _select_spectrum(vals, batch_size, rng)
    ids = _sample_projection(eigenbasis[:, subset], rng)
    return np.sort(ids)


def set_score(factor, subset, lam, feedback):
    """Trajectory score of one selected batch.

    ``4*(1-lam)`` times the log diversity volume plus ``4*lam`` times the
    summed log feedback. The empty batch scores zero; a singular diversity
    block sends the score to ``-inf`` unless quality is all that matters
    (``lam = 1``), where the volume term carries zero weight.
    """
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise InvalidInputError(f"lam must lie in [0, 1], got {lam}")
    ids = check_item_ids(subset, factor.n_items, "subset")
    if ids.size == 0:
        return 0.0
    feedback = check_positive_vector(feedback, "feedback")
    if feedback.shape[0] != ids.size:
        raise InvalidInputError(
            f"feedback has length {feedback.shape[0]}, expected {ids.size}"
        )
    quality_term = 4.0 * lam * float(np.sum(np.log(feedback)))
    if lam == 1.0:
        return quality_term
    log_vol = 0.5 * logdet_gram(factor.diversity_rows[ids])
    return 4.0 * (1.0 - lam) * log_vol + quality_term


def diversity_log_volume(factor, subset):
    """Log volume of the diversity matrix restricted to ``subset``."""
    ids = check_item_ids(subset, factor.n_items, "subset")
    if ids.size == 0:
        return 0.0
    return 0.5 * logdet_gram(factor.diversity_rows[ids])
