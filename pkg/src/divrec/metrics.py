"""Round- and trajectory-level evaluation: relevance, precision, volumes.

Volumes use the shared feature map regardless of which method produced the
batch. At the reporting boundary a singular or empty set is a volume of
zero; the ``-inf`` log sentinel exists only inside score computations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError
from .features import log_volume
from .validation import check_item_ids, check_positive_vector


def _reported_volume(log_vol):
    return float(math.exp(log_vol)) if np.isfinite(log_vol) else 0.0


@dataclass(frozen=True)
class RoundMetrics:
    rel: float
    prec: float
    div_local: float
    div_global: float
    runtime_seconds: float = 0.0


@dataclass(frozen=True)
class TrajectorySummary:
    """Per-trajectory means (over rounds) of the round metrics plus div-plus."""

    user_id: int
    seed: int
    rounds: int
    rel: float
    prec: float
    div_local: float
    div_global: float
    div_plus: float
    runtime_seconds: float
    lam_final: float = float("nan")


def round_metrics(batch, quality, feat, history=(), threshold=0.5,
                  runtime_seconds=0.0):
    """Evaluate one recommended batch against the user's current history."""
    batch = check_item_ids(np.asarray(list(batch)), feat.n_items_, "batch",
                           allow_empty=False)
    quality = check_positive_vector(quality, "quality")
    if quality.shape[0] != feat.n_items_:
        raise InvalidInputError(
            f"quality has length {quality.shape[0]}, expected {feat.n_items_}"
        )
    history = check_item_ids(history, feat.n_items_, "history")
    picked = quality[batch]
    rel = float(picked.mean())
    prec = float(np.mean(picked >= threshold))
    div_local = _reported_volume(log_volume(feat, batch))
    union = np.union1d(batch, history)
    div_global = _reported_volume(log_volume(feat, union))
    return RoundMetrics(
        rel=rel,
        prec=prec,
        div_local=div_local,
        div_global=div_global,
        runtime_seconds=float(runtime_seconds),
    )


def effective_diversity(batches, quality, feat, threshold=0.5):
    """Volume of everything recommended across rounds that the user liked.

    Batches are unioned (duplicates collapse), filtered to items whose
    expected feedback clears the threshold; the empty survivor set has
    volume zero.
    """
    quality = check_positive_vector(quality, "quality")
    ids = [check_item_ids(np.asarray(list(b)), feat.n_items_, "batch") for b in batches]
    merged = np.unique(np.concatenate(ids)) if ids else np.empty(0, dtype=np.int64)
    liked = merged[quality[merged] >= threshold] if merged.size else merged
    if liked.size == 0:
        return 0.0
    return _reported_volume(log_volume(feat, liked))


def aggregate(summaries):
    """Two-level aggregation: per-user mean over seeds, then across users.

    Returns ``{metric: (mean, population_std, "mean ± std")}`` with the
    rendered form rounded to two decimals. Raw floats stay available for
    anyone who needs more digits.
    """
    if not summaries:
        raise InvalidInputError("no trajectory summaries to aggregate")
    metrics = ("rel", "prec", "div_local", "div_global", "div_plus",
               "runtime_seconds")
    by_user = {}
    for summary in summaries:
        by_user.setdefault(summary.user_id, []).append(summary)
    table = {}
    for name in metrics:
        user_means = np.array([
            np.mean([getattr(s, name) for s in group])
            for _, group in sorted(by_user.items())
        ])
        mean = float(user_means.mean())
        std = float(user_means.std())  # population: trajectories are the population
        table[name] = (mean, std, f"{mean:.2f} ± {std:.2f}")
    return table


@dataclass(frozen=True)
class DatasetDiagnostics:
    sparsity_pct: float
    gini: float
    hist_div: float


def gini_index(counts):
    """Mean absolute difference Gini over item popularity counts."""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.size == 0 or counts.sum() == 0:
        return 0.0
    total = counts.sum()
    n = counts.size
    ranked = np.sort(counts)
    # Sum over ordered pairs of |xi - xj| via the sorted-rank identity.
    pair_sum = 2.0 * float(np.sum((2 * np.arange(1, n + 1) - n - 1) * ranked))
    return pair_sum / (2.0 * n * total)


def dataset_diagnostics(ratings, feat, histories):
    """Sparsity (% of observed cells), popularity Gini, mean history volume."""
    observed = len(ratings.table)
    cells = ratings.n_users * ratings.n_items
    sparsity = 100.0 * observed / cells if cells else 0.0
    gini = gini_index(ratings.item_counts())
    volumes = []
    for history in histories:
        ids = np.unique(check_item_ids(history, feat.n_items_, "history"))
        if ids.size == 0:
            volumes.append(0.0)
        else:
            volumes.append(_reported_volume(log_volume(feat, ids)))
    hist_div = float(np.mean(volumes)) if volumes else 0.0
    return DatasetDiagnostics(sparsity_pct=sparsity, gini=gini, hist_div=hist_div)
