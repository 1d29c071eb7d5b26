"""Estimator-style facades over the factor builders and selectors.

``fit`` learns the low-rank similarity representation from raw item
embeddings; ``recommend`` turns a per-item quality vector (plus whatever the
strategy needs: consumption history, the previous batch, a round counter)
into a batch of item ids. Parameters follow the usual get_params/set_params
contract so instances clone cleanly.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .baselines import RerankConfig, mmr_select, xquad_select
from .exceptions import RankDeficientError
from .features import NystroemFeatureMap
from .inference import Selection, _quality_order, greedy_map, sample_kdpp
from .likelihood import LikelihoodSpec, build_l_factor
from .neighbors import build_index

STRATEGIES = ("map", "sample")


class _FittedFeatureMixin:
    """Shared fit step: learn the feature map, defer the neighbor index."""

    def _fit_features(self, items):
        self.feature_map_ = NystroemFeatureMap(
            kernel=self.kernel,
            bandwidth=self.bandwidth,
            rank=self.rank,
            n_landmarks=self.n_landmarks,
            random_state=self.random_state,
        ).fit(items)
        self.index_ = None
        return self

    def _require_fitted(self):
        if getattr(self, "feature_map_", None) is None:
            raise NotFittedError(
                f"{type(self).__name__} must be fit on items before recommending"
            )

    def _neighbor_index(self):
        self._require_fitted()
        if self.index_ is None:
            self.index_ = build_index(self.feature_map_,
                                      structure=self.neighbor_structure)
        return self.index_


class DQDRecommender(_FittedFeatureMixin, BaseEstimator):
    """Quality/diversity batch recommender with pluggable conditioning.

    ``method`` picks how the likelihood factor is assembled (plain
    decomposition, conditioning on history, conditioning on the previous
    batch, history denuding, or an epsilon-greedy mix), ``strategy`` picks
    greedy maximisation or exact sampling, and ``lam`` trades quality
    against diversity.
    """

    def __init__(self, method="qd_decomp", strategy="map", lam=0.5, alpha=0.0,
                 epsilon=0.9, batch_size=3, rank=100, n_landmarks=None,
                 kernel="linear", bandwidth=1.0, neighbor_structure="brute",
                 random_state=0):
        self.method = method
        self.strategy = strategy
        self.lam = lam
        self.alpha = alpha
        self.epsilon = epsilon
        self.batch_size = batch_size
        self.rank = rank
        self.n_landmarks = n_landmarks
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.neighbor_structure = neighbor_structure
        self.random_state = random_state

    def fit(self, X, y=None):
        """Learn the low-rank item representation from embeddings or a store."""
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"unknown strategy {self.strategy!r}; pick one of {STRATEGIES}"
            )
        return self._fit_features(X)

    def build_factor(self, quality, history=(), round_index=0, lam=None,
                     previous_batch=(), seed=None):
        """Assemble the likelihood factor for one round without selecting."""
        self._require_fitted()
        spec = LikelihoodSpec(
            method=self.method,
            quality=np.asarray(quality, dtype=np.float64),
            lam=self.lam if lam is None else float(lam),
            history=tuple(int(i) for i in history),
            alpha=self.alpha,
            epsilon=self.epsilon,
            previous_batch=tuple(int(i) for i in previous_batch),
        )
        index = self._neighbor_index() if self.method == "b_divrec" else None
        rng_seed = self.random_state if seed is None else seed
        return build_l_factor(spec, self.feature_map_, index=index,
                              round_index=round_index, rng_seed=rng_seed)

    def select(self, factor, round_index=0, seed=None):
        """Run the configured selection strategy on a prepared factor."""
        if self.strategy == "map":
            return greedy_map(factor, self.batch_size)
        base_seed = self.random_state if seed is None else seed
        try:
            ids = sample_kdpp(factor, self.batch_size,
                              seed=(base_seed, round_index, 1))
        except RankDeficientError as err:
            rank = err.rank or 0
            if rank > 0:
                ids = sample_kdpp(factor, rank, seed=(base_seed, round_index, 1))
            else:
                ids = np.empty(0, dtype=np.int64)
            pad = _quality_order(factor.quality, ids)
            ids = np.sort(np.concatenate(
                [ids, pad[: self.batch_size - ids.size]]
            ).astype(np.int64))
            return Selection(ids, rank_deficient=True)
        return Selection(ids, rank_deficient=False)

    def recommend(self, quality, history=(), round_index=0, lam=None,
                  previous_batch=(), seed=None):
        """One full round: build the factor, then pick a batch."""
        factor = self.build_factor(quality, history=history,
                                   round_index=round_index, lam=lam,
                                   previous_batch=previous_batch, seed=seed)
        return self.select(factor, round_index=round_index, seed=seed)


class MMRReranker(_FittedFeatureMixin, BaseEstimator):
    """Greedy relevance-minus-max-similarity reranking over the feature rows."""

    def __init__(self, lam=0.5, batch_size=3, rank=100, n_landmarks=None,
                 kernel="linear", bandwidth=1.0, neighbor_structure="brute",
                 random_state=0):
        self.lam = lam
        self.batch_size = batch_size
        self.rank = rank
        self.n_landmarks = n_landmarks
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.neighbor_structure = neighbor_structure
        self.random_state = random_state

    def fit(self, X, y=None):
        return self._fit_features(X)

    def recommend(self, quality, history=(), **_unused):
        self._require_fitted()
        cfg = RerankConfig(lam=self.lam, batch_size=self.batch_size)
        ids = mmr_select(cfg, np.asarray(quality, dtype=np.float64),
                         self.feature_map_, history=history)
        return Selection(ids, rank_deficient=False)


class XQuadReranker(_FittedFeatureMixin, BaseEstimator):
    """Explicit query-aspect diversification against history coverage."""

    def __init__(self, lam=0.5, alpha=0.0, batch_size=3, rank=100,
                 n_landmarks=None, kernel="linear", bandwidth=1.0,
                 neighbor_structure="brute", random_state=0):
        self.lam = lam
        self.alpha = alpha
        self.batch_size = batch_size
        self.rank = rank
        self.n_landmarks = n_landmarks
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.neighbor_structure = neighbor_structure
        self.random_state = random_state

    def fit(self, X, y=None):
        return self._fit_features(X)

    def recommend(self, quality, history=(), **_unused):
        self._require_fitted()
        cfg = RerankConfig(lam=self.lam, alpha=self.alpha,
                           batch_size=self.batch_size)
        ids = xquad_select(cfg, np.asarray(quality, dtype=np.float64),
                           self.feature_map_, self._neighbor_index(),
                           history=history)
        return Selection(ids, rank_deficient=False)
