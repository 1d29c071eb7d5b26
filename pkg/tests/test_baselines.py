"""Reranking baselines: marginal relevance and subquery coverage."""

import numpy as np
import pytest

from divrec.baselines import RerankConfig, mmr_select, xquad_select
from divrec.exceptions import InvalidInputError
from divrec.features import fit_nystroem
from divrec.neighbors import build_index
from divrec.validation import normalize_rows


def fitted(seed, n=20, d=5):
    rng = np.random.default_rng(seed)
    rows = normalize_rows(rng.normal(size=(n, d)), "rows")
    feat = fit_nystroem(rows, rank=d, n_landmarks=n)
    quality = rng.uniform(0.5, 2.0, size=n)
    return feat, quality


class TestRerankConfig:
    def test_lam_outside_unit_interval_rejected(self):
        with pytest.raises(InvalidInputError):
            RerankConfig(lam=1.2)

    def test_alpha_must_be_a_cosine(self):
        with pytest.raises(InvalidInputError):
            RerankConfig(alpha=1.5)

    def test_batch_size_must_be_positive(self):
        with pytest.raises(InvalidInputError):
            RerankConfig(batch_size=0)


class TestMmr:
    def test_relevance_only_ranks_by_quality(self):
        feat, quality = fitted(0)
        cfg = RerankConfig(lam=1.0, batch_size=4)
        picked = mmr_select(cfg, quality, feat)
        expected = np.argsort(-quality)[:4]
        np.testing.assert_array_equal(picked, expected)

    def test_redundancy_penalty_matches_hand_rollout(self):
        feat, quality = fitted(1)
        cfg = RerankConfig(lam=0.6, batch_size=3)
        picked = mmr_select(cfg, quality, feat)
        rows = feat.matrix_
        selected = []
        for _ in range(3):
            if selected:
                penalty = (rows @ rows[selected].T).max(axis=1)
            else:
                penalty = np.zeros(rows.shape[0])
            scores = 0.6 * quality - 0.4 * penalty
            scores[selected] = -np.inf
            selected.append(int(np.argmax(scores)))
        np.testing.assert_array_equal(picked, selected)

    def test_duplicate_of_top_item_is_skipped(self):
        rows = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        feat = fit_nystroem(rows, rank=2, n_landmarks=3)
        quality = np.array([2.0, 1.9, 1.0])
        picked = mmr_select(RerankConfig(lam=0.5, batch_size=2), quality, feat)
        np.testing.assert_array_equal(picked, [0, 2])

    def test_history_items_act_as_penalty_anchors(self):
        rows = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        feat = fit_nystroem(rows, rank=2, n_landmarks=3)
        quality = np.array([1.0, 1.8, 1.0])
        # item 1 duplicates consumed item 0 (score 0.9 - 0.5), so the
        # orthogonal item wins at 0.5 - 0.0 despite its lower quality
        picked = mmr_select(RerankConfig(lam=0.5, batch_size=1), quality, feat,
                            history=[0])
        np.testing.assert_array_equal(picked, [2])

    def test_excluded_ids_are_never_selected(self):
        feat, quality = fitted(2)
        cfg = RerankConfig(lam=0.7, batch_size=5)
        exclude = [0, 3, 11]
        picked = mmr_select(cfg, quality, feat, exclude=exclude)
        assert not set(picked) & set(exclude)

    def test_batch_beyond_selectable_pool_rejected(self):
        feat, quality = fitted(3, n=6)
        cfg = RerankConfig(batch_size=5)
        with pytest.raises(InvalidInputError):
            mmr_select(cfg, quality, feat, exclude=[0, 1])

    def test_quality_length_mismatch_rejected(self):
        feat, _ = fitted(4, n=8)
        with pytest.raises(InvalidInputError):
            mmr_select(RerankConfig(), np.ones(5), feat)


class TestXquad:
    def test_empty_history_is_a_quality_ranking(self):
        feat, quality = fitted(5)
        index = build_index(feat)
        picked = xquad_select(RerankConfig(lam=0.3, batch_size=4), quality,
                              feat, index)
        np.testing.assert_array_equal(picked, np.argsort(-quality)[:4])

    def test_covered_subqueries_stop_paying_out(self):
        # two orthogonal history anchors; after one side is covered, the
        # uncovered side's candidate wins even at lower quality
        rows = np.array([
            [1.0, 0.0],
            [0.0, 1.0],
            [0.99, np.sqrt(1 - 0.99**2)],
            [np.sqrt(1 - 0.99**2), 0.99],
        ])
        feat = fit_nystroem(rows, rank=2, n_landmarks=4)
        index = build_index(feat)
        quality = np.array([0.1, 0.1, 1.0, 0.9])
        cfg = RerankConfig(lam=0.5, alpha=0.9, batch_size=2)
        picked = xquad_select(cfg, quality, feat, index, history=[0, 1],
                              exclude=[0, 1])
        np.testing.assert_array_equal(picked, [2, 3])

    def test_matches_hand_rollout(self):
        feat, quality = fitted(6)
        index = build_index(feat)
        cfg = RerankConfig(lam=0.4, alpha=0.3, batch_size=3)
        history = np.array([1, 7, 12])
        picked = xquad_select(cfg, quality, feat, index, history=history)
        covers = index.vectors @ index.vectors[history].T >= 0.3
        uncovered = np.ones(3)
        selected = []
        for _ in range(3):
            gain = 0.4 * quality + 0.6 * (covers @ uncovered) / 3
            gain[selected] = -np.inf
            pick = int(np.argmax(gain))
            selected.append(pick)
            uncovered *= 1.0 - covers[pick]
        np.testing.assert_array_equal(picked, selected)

    def test_excluded_ids_are_never_selected(self):
        feat, quality = fitted(7)
        index = build_index(feat)
        cfg = RerankConfig(lam=0.5, alpha=0.2, batch_size=5)
        exclude = [2, 9]
        picked = xquad_select(cfg, quality, feat, index, history=[0],
                              exclude=exclude)
        assert not set(picked) & set(exclude)

    def test_batch_beyond_selectable_pool_rejected(self):
        feat, quality = fitted(8, n=5)
        index = build_index(feat)
        with pytest.raises(InvalidInputError):
            xquad_select(RerankConfig(batch_size=4), quality, feat, index,
                         exclude=[1, 2])
