"""Low-rank factors of the quality-diversity likelihood matrix.

A batch model is described by a quality vector ``q`` and a diversity matrix
``f`` with known factor ``X`` (``f = X X^T``). The blended likelihood

    L = diag(q)^(2*lam) @ f^(2*(1-lam)) @ diag(q)^(2*lam)

is never materialised: we return row factors ``F`` with ``L = F F^T``. The
trade-off ``lam`` runs from pure diversity (0) to pure quality (1); at the
balanced value 0.5 no matrix power is needed and ``F = q * X`` exactly.

Five ways to build ``f``:

- ``qd_decomp``     - the reconstructed kernel itself.
- ``cond_dpp``      - kernel conditioned on the user history (Schur complement).
- ``eps_greedy``    - per-round coin: identity (exploit) or kernel at lam=0 (explore).
- ``markov_dpp``    - conditioned on the previous round's batch only.
- ``b_divrec``      - kernel rows denuded against near-history items: every item
                      whose best history cosine reaches ``1 - alpha`` has that
                      neighbor's feature row subtracted from its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    HistoryDegenerateError,
    InvalidInputError,
    NotPositiveDefiniteError,
)
from .linalg import chol_solve, truncated_psd_eig
from .validation import (
    check_in_range,
    check_item_ids,
    check_positive_vector,
)

METHODS = ("qd_decomp", "cond_dpp", "eps_greedy", "markov_dpp", "b_divrec")

#: Slack on the denuding gate so an exact duplicate (cosine one up to float
#: rounding) always triggers even at alpha = 0.
GATE_SLACK = 1e-9


@dataclass(frozen=True)
class LikelihoodSpec:
    """Everything needed to build one round's likelihood factor."""

    method: str
    quality: np.ndarray
    lam: float = 0.5
    history: tuple = ()
    alpha: float = 0.0
    epsilon: float = 0.9
    previous_batch: tuple = ()

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInputError(
                f"unknown method {self.method!r}; pick one of {METHODS}"
            )
        check_in_range(self.lam, 0.0, 1.0, "lam")
        check_in_range(self.alpha, 0.0, 2.0, "alpha")
        check_in_range(self.epsilon, 0.0, 1.0, "epsilon")
        object.__setattr__(self, "quality", check_positive_vector(self.quality, "quality"))
        object.__setattr__(self, "history", tuple(int(i) for i in self.history))
        object.__setattr__(
            self, "previous_batch", tuple(int(i) for i in self.previous_batch)
        )


@dataclass
class LFactor:
    """Row factor of the likelihood plus the pieces scores need later.

    ``rows @ rows.T`` is the likelihood matrix; ``diversity_rows`` factor the
    un-weighted diversity matrix ``f`` used by set scores and gradients.
    """

    rows: np.ndarray
    diversity_rows: np.ndarray
    quality: np.ndarray
    lam: float
    active_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.active_ids is None:
            alive = np.any(self.rows != 0.0, axis=1)
            self.active_ids = np.flatnonzero(alive)

    @property
    def n_items(self):
        return self.rows.shape[0]


def _conditioned_rows(feature_rows, conditioning_ids, what="history"):
    """Factor of the kernel Schur complement given an included id set."""
    if len(conditioning_ids) == 0:
        return feature_rows
    block = feature_rows[conditioning_ids]
    gram = block @ block.T
    try:
        solved = chol_solve(gram, block)
    except NotPositiveDefiniteError:
        raise HistoryDegenerateError(
            f"{what} gram matrix is singular; drop collinear {what} items"
        ) from None
    return feature_rows - (feature_rows @ block.T) @ solved


def _denuded_rows(feature_rows, index, history_ids, alpha):
    """Subtract each item's nearest over-threshold history row from its own."""
    if len(history_ids) == 0:
        return feature_rows
    neighbor_ids, best_cos = index.max_cosine_bulk(history_ids)
    triggered = best_cos >= (1.0 - alpha) - GATE_SLACK
    rows = feature_rows.copy()
    rows[triggered] -= feature_rows[neighbor_ids[triggered]]
    return rows


def _quality_weighted(diversity_rows, quality, lam):
    """Blend quality into the diversity factor at trade-off ``lam``.

    At ``lam = 0.5`` the result is exactly ``q * X``. Otherwise the power
    ``f^(2*(1-lam))`` is taken on the small dual gram ``X^T X``, keeping the
    cost linear in the number of items.
    """
    if lam == 0.5:
        return quality[:, None] * diversity_rows
    dual = diversity_rows.T @ diversity_rows
    vals, vecs = truncated_psd_eig(dual)
    if vals.size == 0:
        return np.zeros((diversity_rows.shape[0], 1))
    core = vecs * vals ** ((1.0 - 2.0 * lam) / 2.0)
    weight = quality ** (2.0 * lam)
    return weight[:, None] * (diversity_rows @ core)


def build_l_factor(spec, feat, index=None, round_index=0, rng_seed=0):
    """Assemble the likelihood factor for one recommendation round."""
    quality = np.asarray(spec.quality, dtype=np.float64)
    if quality.shape[0] != feat.n_items_:
        raise InvalidInputError(
            f"quality has length {quality.shape[0]}, expected {feat.n_items_} items"
        )
    history = check_item_ids(spec.history, feat.n_items_, "history")
    feature_rows = feat.matrix_
    lam = spec.lam

    if spec.method == "qd_decomp":
        diversity = feature_rows
    elif spec.method == "cond_dpp":
        diversity = _conditioned_rows(feature_rows, np.unique(history))
    elif spec.method == "markov_dpp":
        previous = check_item_ids(spec.previous_batch, feat.n_items_, "previous batch")
        diversity = _conditioned_rows(
            feature_rows, np.unique(previous), what="previous-batch"
        )
    elif spec.method == "b_divrec":
        if index is None:
            raise InvalidInputError("b_divrec needs a neighbor index over the features")
        diversity = _denuded_rows(feature_rows, index, history, spec.alpha)
    elif spec.method == "eps_greedy":
        coin = np.random.default_rng((rng_seed, round_index)).random()
        if coin < spec.epsilon:
            diversity = np.eye(feat.n_items_)  # exploit: quality-only round
            lam = 0.5
        else:
            diversity = feature_rows  # explore: pure diversity round
            lam = 0.0
    else:  # pragma: no cover - guarded by LikelihoodSpec
        raise InvalidInputError(f"unknown method {spec.method!r}")

    rows = _quality_weighted(diversity, quality, lam)
    return LFactor(
        rows=rows,
        diversity_rows=diversity,
        quality=quality,
        lam=lam,
    )
