"""Low-rank feature maps whose inner products reconstruct the kernel.

The map is the classical landmark (Nystroem) construction: sample anchor
items, eigendecompose their kernel block, and project every item through it.
Inner products of the resulting rows approximate kernel values, exactly so
when the anchors span the kernel's range.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import DegenerateKernelError, InvalidInputError
from .kernels import KernelSpec, kernel_matrix
from .linalg import EIGEN_FLOOR, logdet_gram
from .validation import check_item_ids, check_positive_int, normalize_rows


def _iter_blocks(x, batch_rows=4096):
    """Yield row blocks from either an array or a batched item store."""
    if hasattr(x, "iter_batches"):
        yield from x.iter_batches()
        return
    x = normalize_rows(x, "embeddings")
    for start in range(0, x.shape[0], batch_rows):
        yield start, x[start : start + batch_rows]


class NystroemFeatureMap(BaseEstimator, TransformerMixin):
    """Landmark feature map ``v(x) = k(x, anchors) @ U diag(eigs)^-1/2``.

    Parameters
    ----------
    kernel : str
        Kernel family, ``"linear"`` or ``"rbf"``.
    bandwidth : float
        RBF bandwidth; ignored by the linear kernel.
    rank : int
        Maximum number of feature dimensions kept (100 covers the real
        datasets this was sized for; raise it for exactness studies).
    n_landmarks : int or None
        How many anchor items to sample uniformly without replacement.
        ``None`` means one anchor per requested rank.
    random_state : int
        Seed for the anchor draw.

    Attributes
    ----------
    matrix_ : ndarray of shape (n_items, rank_)
        Feature rows for every fitted item; gram of a subset of rows is the
        reconstructed kernel block.
    rank_ : int
        Dimensions retained after flooring the anchor spectrum.
    anchor_ids_ : ndarray
        Ids of the sampled landmark items.
    eigen_floor_ : float
        Smallest anchor eigenvalue that survived the relative floor.
    """

    def __init__(self, kernel="linear", bandwidth=1.0, rank=100, n_landmarks=None,
                 random_state=0):
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.rank = rank
        self.n_landmarks = n_landmarks
        self.random_state = random_state

    def _spec(self):
        return KernelSpec(family=self.kernel, bandwidth=self.bandwidth)

    def fit(self, X, y=None):
        spec = self._spec()
        rank = check_positive_int(self.rank, "rank")
        n_items = X.n_items if hasattr(X, "n_items") else np.asarray(X).shape[0]
        if n_items == 0:
            raise InvalidInputError("cannot fit a feature map on an empty item set")
        if rank > n_items:
            raise InvalidInputError(
                f"rank {rank} exceeds the number of items {n_items}"
            )
        n_landmarks = self.n_landmarks if self.n_landmarks is not None else rank
        n_landmarks = check_positive_int(n_landmarks, "n_landmarks")
        n_landmarks = min(n_landmarks, n_items)
        if n_landmarks < rank:
            raise InvalidInputError(
                f"n_landmarks {n_landmarks} cannot be smaller than rank {rank}"
            )

        rng = np.random.default_rng(self.random_state)
        anchor_ids = np.sort(rng.choice(n_items, size=n_landmarks, replace=False))
        if hasattr(X, "rows"):
            anchors = X.rows(anchor_ids)
        else:
            anchors = normalize_rows(np.asarray(X), "embeddings")[anchor_ids]

        block = kernel_matrix(spec, anchors, anchors)
        block = 0.5 * (block + block.T)
        vals, vecs = np.linalg.eigh(block)
        vals = vals[::-1]
        vecs = vecs[:, ::-1]
        floor = EIGEN_FLOOR * max(float(vals[0]), 0.0)
        keep = vals > floor
        keep &= np.arange(vals.size) < rank
        if not np.any(keep):
            raise DegenerateKernelError(
                "anchor kernel block has no eigenvalue above the floor"
            )
        vals = vals[keep]
        vecs = vecs[:, keep]

        self.kernel_spec_ = spec
        self.anchor_ids_ = anchor_ids
        self.anchor_embeddings_ = anchors
        self.projection_ = vecs / np.sqrt(vals)
        self.rank_ = int(vals.size)
        self.eigen_floor_ = float(vals[-1])
        self.n_items_ = int(n_items)

        rows = np.empty((n_items, self.rank_))
        for start, blockrows in _iter_blocks(X):
            rows[start : start + blockrows.shape[0]] = (
                kernel_matrix(spec, blockrows, anchors) @ self.projection_
            )
        self.matrix_ = rows
        return self

    def transform(self, X):
        """Feature rows for new embeddings (rows are normalised first)."""
        if not hasattr(self, "projection_"):
            raise InvalidInputError("feature map is not fitted")
        x = normalize_rows(np.asarray(X), "embeddings")
        if x.shape[1] != self.anchor_embeddings_.shape[1]:
            raise InvalidInputError(
                f"embedding dimension {x.shape[1]} does not match the fitted "
                f"{self.anchor_embeddings_.shape[1]}"
            )
        return kernel_matrix(self.kernel_spec_, x, self.anchor_embeddings_) @ self.projection_

    def reconstruct(self, ids_a, ids_b=None):
        """Reconstructed kernel block between two fitted id sets."""
        a = self.matrix_[check_item_ids(ids_a, self.n_items_)]
        b = a if ids_b is None else self.matrix_[check_item_ids(ids_b, self.n_items_)]
        return a @ b.T


def fit_nystroem(items, rank=100, seed=0, kernel="linear", bandwidth=1.0,
                 n_landmarks=None):
    """Functional wrapper over :class:`NystroemFeatureMap` for script use."""
    return NystroemFeatureMap(
        kernel=kernel,
        bandwidth=bandwidth,
        rank=rank,
        n_landmarks=n_landmarks,
        random_state=seed,
    ).fit(items)


def log_volume(feat, subset):
    """Log volume ``0.5 * logdet`` of the reconstructed kernel over ``subset``.

    The empty set has log-volume zero; any rank-deficient subset (including
    duplicated ids) returns ``-inf``. Work is done on the gram of feature
    rows, so cost never grows with the universe size.
    """
    ids = check_item_ids(subset, feat.n_items_, "subset")
    if ids.size == 0:
        return 0.0
    return 0.5 * logdet_gram(feat.matrix_[ids])
