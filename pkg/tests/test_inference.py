"""Batch selection: greedy determinant ascent and exact fixed-size sampling."""

import numpy as np
import pytest

from divrec.exceptions import InvalidInputError, RankDeficientError
from divrec.inference import (
    Selection,
    diversity_log_volume,
    greedy_map,
    sample_kdpp,
    set_score,
)
from divrec.likelihood import LFactor
from divrec.linalg import logdet_gram
from divrec.validation import normalize_rows


def factor_from_rows(rows, quality=None):
    rows = np.asarray(rows, dtype=np.float64)
    if quality is None:
        quality = np.ones(rows.shape[0])
    return LFactor(rows=rows, diversity_rows=rows, quality=quality, lam=0.5)


def random_factor(seed, n=12, d=5):
    rng = np.random.default_rng(seed)
    rows = normalize_rows(rng.normal(size=(n, d)), "rows")
    scale = rng.uniform(0.5, 1.5, size=n)
    return factor_from_rows(scale[:, None] * rows)


class TestGreedyMap:
    def test_two_by_two_hand_example(self):
        # diag gains 4, 1, 2.6325; first pick is item 0. Conditioned gains:
        # item 1: 1 - (1.2^2)/4 = 0.64, item 2: 2.6325 - (2.7^2)/4 = 0.81,
        # so the second pick is item 2.
        rows = np.array([[2.0, 0.0], [0.6, 0.8], [1.35, 0.9]])
        picked = greedy_map(factor_from_rows(rows), 2)
        np.testing.assert_array_equal(picked.ids, [0, 2])
        assert not picked.rank_deficient

    def test_each_step_maximises_marginal_log_volume(self):
        for seed in range(12):
            factor = random_factor(seed)
            picked = list(greedy_map(factor, 4).ids)
            for step in range(4):
                prefix = picked[:step]
                chosen = picked[step]
                best = logdet_gram(factor.rows[prefix + [chosen]])
                for other in range(factor.n_items):
                    if other in prefix:
                        continue
                    rival = logdet_gram(factor.rows[prefix + [other]])
                    assert best >= rival - 1e-9

    def test_ids_come_back_in_pick_order(self):
        rows = np.array([[1.0, 0.0], [0.0, 3.0], [0.0, 0.5]])
        picked = greedy_map(factor_from_rows(rows), 2)
        np.testing.assert_array_equal(picked.ids, [1, 0])

    def test_exact_ties_break_toward_lowest_id(self):
        rows = np.eye(4)[[2, 0, 1, 3]]  # four orthonormal rows, equal gains
        picked = greedy_map(factor_from_rows(rows), 3)
        np.testing.assert_array_equal(picked.ids, [0, 1, 2])

    def test_rank_collapse_pads_by_quality_and_flags(self):
        rows = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.4, 0.3]])
        quality = np.array([1.0, 1.0, 0.2, 5.0])
        picked = greedy_map(factor_from_rows(rows, quality), 4)
        assert picked.rank_deficient
        assert len(picked.ids) == 4
        # two spanning picks, then quality order fills the rest
        assert list(picked.ids[2:]) == [3, 2]

    def test_batch_larger_than_catalog_rejected(self):
        with pytest.raises(InvalidInputError):
            greedy_map(random_factor(0, n=3), 4)

    def test_selection_is_iterable_and_sized(self):
        picked = greedy_map(random_factor(1), 3)
        assert isinstance(picked, Selection)
        assert len(picked) == 3
        assert list(picked) == list(picked.ids)


class TestSampleKdpp:
    def test_draws_distinct_sorted_ids_of_requested_size(self):
        factor = random_factor(2)
        for seed in range(20):
            ids = sample_kdpp(factor, 4, seed=seed)
            assert ids.shape == (4,)
            assert np.unique(ids).size == 4
            assert np.all(np.diff(ids) > 0)

    def test_same_seed_reproduces_the_draw(self):
        factor = random_factor(3)
        a = sample_kdpp(factor, 3, seed=(1, 2, 3))
        b = sample_kdpp(factor, 3, seed=(1, 2, 3))
        np.testing.assert_array_equal(a, b)

    def test_batch_beyond_rank_reports_the_rank(self):
        rows = np.array([[1.0, 0.0], [0.0, 1.0], [0.7, 0.7]])
        with pytest.raises(RankDeficientError) as info:
            sample_kdpp(factor_from_rows(rows), 3)
        assert info.value.rank == 2

    def test_singleton_frequencies_follow_the_diagonal(self):
        # For batches of one, P(item) is proportional to its squared row norm.
        rows = np.diag([2.0, 1.0, 1.0])
        factor = factor_from_rows(rows)
        counts = np.zeros(3)
        for seed in range(4000):
            counts[sample_kdpp(factor, 1, seed=seed)[0]] += 1
        freq = counts / counts.sum()
        np.testing.assert_allclose(freq, [4 / 6, 1 / 6, 1 / 6], atol=0.03)


class TestSetScore:
    def test_known_two_item_score(self):
        rows = np.eye(3)
        factor = factor_from_rows(rows)
        # orthonormal pair: log volume 0, so only feedback contributes
        score = set_score(factor, [0, 1], 0.5, np.array([np.e, np.e]))
        np.testing.assert_allclose(score, 4 * 0.5 * 2.0, atol=1e-12)

    def test_score_is_affine_in_lambda(self):
        factor = random_factor(4)
        subset = [0, 3, 7]
        feedback = np.array([1.5, 0.7, 2.0])
        at_zero = set_score(factor, subset, 0.0, feedback)
        at_one = set_score(factor, subset, 1.0, feedback)
        for lam in (0.25, 0.5, 0.9):
            blended = set_score(factor, subset, lam, feedback)
            np.testing.assert_allclose(blended,
                                       (1 - lam) * at_zero + lam * at_one,
                                       atol=1e-9)

    def test_singular_batch_scores_minus_inf_unless_quality_only(self):
        rows = np.array([[1.0, 0.0], [1.0, 0.0]])
        factor = factor_from_rows(rows)
        assert set_score(factor, [0, 1], 0.5, np.ones(2)) == -np.inf
        assert np.isfinite(set_score(factor, [0, 1], 1.0, np.ones(2)))

    def test_empty_batch_scores_zero(self):
        assert set_score(random_factor(5), [], 0.5, np.ones(0)) == 0.0

    def test_feedback_length_must_match_batch(self):
        with pytest.raises(InvalidInputError):
            set_score(random_factor(6), [0, 1], 0.5, np.ones(3))

    def test_lambda_outside_unit_interval_rejected(self):
        with pytest.raises(InvalidInputError):
            set_score(random_factor(7), [0], 1.5, np.ones(1))


class TestDiversityLogVolume:
    def test_empty_subset_is_zero(self):
        assert diversity_log_volume(random_factor(8), []) == 0.0

    def test_duplicate_ids_are_minus_inf(self):
        assert diversity_log_volume(random_factor(9), [2, 2]) == -np.inf

    def test_matches_direct_gram_logdet(self):
        factor = random_factor(10)
        subset = [1, 4, 9]
        expected = 0.5 * logdet_gram(factor.diversity_rows[subset])
        np.testing.assert_allclose(diversity_log_volume(factor, subset),
                                   expected, atol=1e-12)

    def test_ignores_quality_weighting(self):
        rows = normalize_rows(np.random.default_rng(11).normal(size=(6, 4)),
                              "rows")
        heavy = LFactor(rows=3.0 * rows, diversity_rows=rows,
                        quality=np.full(6, 3.0), lam=0.5)
        light = LFactor(rows=rows, diversity_rows=rows,
                        quality=np.ones(6), lam=0.5)
        np.testing.assert_allclose(
            diversity_log_volume(heavy, [0, 2]),
            diversity_log_volume(light, [0, 2]),
            atol=1e-12,
        )
