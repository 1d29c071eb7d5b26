"""Nearest-neighbor search in feature space, restricted to arbitrary id subsets.

One index is built over the whole universe; every query carries the subset
(usually a user's history) it is allowed to look at. Both backends are exact
and agree bit-for-bit: ties on cosine break toward the lowest item id.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import DegenerateItemError, InvalidInputError
from .validation import check_item_ids

STRUCTURES = ("brute", "tree")


class NeighborIndex:
    """Cosine nearest-neighbor index over normalised feature rows."""

    def __init__(self, vectors, structure="brute"):
        if structure not in STRUCTURES:
            raise InvalidInputError(
                f"unknown structure {structure!r}; pick one of {STRUCTURES}"
            )
        vectors = np.asarray(vectors, dtype=np.float64)
        norms = np.linalg.norm(vectors, axis=1)
        bad = np.flatnonzero(norms == 0.0)
        if bad.size:
            raise DegenerateItemError(
                f"feature row {bad[0]} has zero norm and no cosine direction"
            )
        self.vectors = vectors / norms[:, None]
        self.structure = structure
        self.n_items = vectors.shape[0]
        self._tree = cKDTree(self.vectors) if structure == "tree" else None

    # -- scalar query ------------------------------------------------------

    def max_cosine_in(self, query_id, restrict):
        """Best cosine between ``query_id`` and the ``restrict`` id set.

        Returns ``(best_id, best_cos)``; ``(None, -inf)`` when the restrict
        set is empty. The query id itself is not excluded: restricting to a
        set containing the query returns cosine one.
        """
        query_id = int(
            check_item_ids([query_id], self.n_items, "query id", allow_empty=False)[0]
        )
        restrict = check_item_ids(restrict, self.n_items, "restrict set")
        if restrict.size == 0:
            return None, float("-inf")
        restrict = np.unique(restrict)  # sorted ascending: first argmax = lowest id
        if self._tree is not None:
            return self._tree_query(query_id, restrict)
        return self._brute_query(query_id, restrict)

    def _brute_query(self, query_id, restrict):
        cosines = self.vectors[restrict] @ self.vectors[query_id]
        best = int(np.argmax(cosines))
        return int(restrict[best]), float(cosines[best])

    def _tree_query(self, query_id, restrict):
        # Euclidean order on the unit sphere is the reverse of cosine order,
        # so the first k-NN hit inside the restrict set is the cosine argmax.
        # We then re-rank every candidate at the winning distance so that
        # exact-tie behaviour matches the brute scan.
        query = self.vectors[query_id]
        allowed = np.zeros(self.n_items, dtype=bool)
        allowed[restrict] = True
        k = 1
        best_dist = None
        while True:
            k = min(k, self.n_items)
            dists, ids = self._tree.query(query, k=k)
            dists = np.atleast_1d(dists)
            ids = np.atleast_1d(ids)
            hits = allowed[ids]
            if np.any(hits):
                best_dist = float(dists[np.argmax(hits)])
                break
            if k == self.n_items:
                break
            k *= 2
        if best_dist is None:  # unreachable: restrict is non-empty
            raise InvalidInputError("restrict set vanished during query")
        near = self._tree.query_ball_point(query, best_dist + 1e-12)
        candidates = np.array(sorted(i for i in near if allowed[i]), dtype=np.int64)
        return self._brute_query(query_id, candidates)

    # -- bulk query --------------------------------------------------------

    def max_cosine_bulk(self, restrict):
        """Per-item best cosine against ``restrict``, for all items at once.

        Same semantics as :meth:`max_cosine_in` applied to every id, but one
        matrix product instead of a Python loop. Empty restrict yields
        ``(-1, -inf)`` rows.
        """
        restrict = check_item_ids(restrict, self.n_items, "restrict set")
        if restrict.size == 0:
            return (
                np.full(self.n_items, -1, dtype=np.int64),
                np.full(self.n_items, float("-inf")),
            )
        restrict = np.unique(restrict)
        cosines = self.vectors @ self.vectors[restrict].T
        pick = np.argmax(cosines, axis=1)  # first max = lowest restricted id
        rows = np.arange(self.n_items)
        return restrict[pick], cosines[rows, pick]


def build_index(feat, structure="brute"):
    """Index the fitted feature map's rows for restricted cosine queries."""
    return NeighborIndex(feat.matrix_, structure=structure)


def max_cosine_in(index, query_id, restrict):
    """Functional form of :meth:`NeighborIndex.max_cosine_in`."""
    return index.max_cosine_in(query_id, restrict)
