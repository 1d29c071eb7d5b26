"""Likelihood factor assembly for every method and trade-off setting."""

import numpy as np
import pytest

from divrec.exceptions import (
    AssumptionViolationError,
    HistoryDegenerateError,
    InvalidInputError,
)
from divrec.features import fit_nystroem
from divrec.likelihood import LFactor, LikelihoodSpec, build_l_factor
from divrec.neighbors import build_index
from divrec.validation import normalize_rows


def fitted_catalog(seed, n=25, d=6):
    rng = np.random.default_rng(seed)
    rows = normalize_rows(rng.normal(size=(n, d)), "rows")
    feat = fit_nystroem(rows, rank=d, n_landmarks=n)
    quality = rng.uniform(0.5, 2.0, size=n)
    return feat, quality


def likelihood_of(factor):
    return factor.rows @ factor.rows.T


class TestSpecValidation:
    def test_unknown_method_rejected(self):
        with pytest.raises(InvalidInputError):
            LikelihoodSpec(method="greedy", quality=np.ones(3))

    def test_lam_outside_unit_interval_rejected(self):
        for lam in (-0.01, 1.01):
            with pytest.raises(InvalidInputError):
                LikelihoodSpec(method="qd_decomp", quality=np.ones(3), lam=lam)

    def test_alpha_limited_to_zero_two(self):
        LikelihoodSpec(method="b_divrec", quality=np.ones(3), alpha=2.0)
        for alpha in (-0.1, 2.1):
            with pytest.raises(InvalidInputError):
                LikelihoodSpec(method="b_divrec", quality=np.ones(3),
                               alpha=alpha)

    def test_nonpositive_quality_rejected(self):
        with pytest.raises(AssumptionViolationError):
            LikelihoodSpec(method="qd_decomp", quality=np.array([1.0, 0.0]))

    def test_quality_length_must_match_catalog(self):
        feat, _ = fitted_catalog(0, n=10)
        spec = LikelihoodSpec(method="qd_decomp", quality=np.ones(7))
        with pytest.raises(InvalidInputError):
            build_l_factor(spec, feat)


class TestQualityDiversityBlend:
    def test_half_lambda_rows_are_quality_times_features(self):
        feat, quality = fitted_catalog(1)
        spec = LikelihoodSpec(method="qd_decomp", quality=quality, lam=0.5)
        factor = build_l_factor(spec, feat)
        np.testing.assert_array_equal(factor.rows,
                                      quality[:, None] * feat.matrix_)

    def test_general_lambda_matches_sandwich_formula(self):
        # rows rows^T must equal diag(q^2l) f^(2(1-l)) diag(q^2l)
        feat, quality = fitted_catalog(2, n=15, d=5)
        f = feat.matrix_ @ feat.matrix_.T
        vals, vecs = np.linalg.eigh(f)
        vals = np.clip(vals, 0.0, None)
        for lam in (0.0, 0.2, 0.5, 0.8):
            spec = LikelihoodSpec(method="qd_decomp", quality=quality, lam=lam)
            built = likelihood_of(build_l_factor(spec, feat))
            keep = vals > 1e-10 * vals.max()
            powered = (vecs[:, keep] * vals[keep] ** (2 * (1 - lam))) @ vecs[:, keep].T
            weight = quality ** (2 * lam)
            expected = weight[:, None] * powered * weight[None, :]
            np.testing.assert_allclose(built, expected, atol=1e-7)

    def test_zero_lambda_ignores_quality(self):
        feat, quality = fitted_catalog(3)
        base = LikelihoodSpec(method="qd_decomp", quality=quality, lam=0.0)
        flat = LikelihoodSpec(method="qd_decomp", quality=np.ones_like(quality),
                              lam=0.0)
        np.testing.assert_allclose(
            likelihood_of(build_l_factor(base, feat)),
            likelihood_of(build_l_factor(flat, feat)),
            atol=1e-8,
        )

    def test_unit_lambda_on_orthonormal_items_is_pure_quality(self):
        rows = np.eye(6)
        feat = fit_nystroem(rows, rank=6, n_landmarks=6)
        quality = np.arange(1.0, 7.0)
        spec = LikelihoodSpec(method="qd_decomp", quality=quality, lam=1.0)
        built = likelihood_of(build_l_factor(spec, feat))
        np.testing.assert_allclose(built, np.diag(quality**4), atol=1e-8)


class TestConditioned:
    def test_empty_history_matches_plain_decomposition(self):
        feat, quality = fitted_catalog(4)
        plain = build_l_factor(
            LikelihoodSpec(method="qd_decomp", quality=quality), feat
        )
        cond = build_l_factor(
            LikelihoodSpec(method="cond_dpp", quality=quality), feat
        )
        np.testing.assert_array_equal(plain.rows, cond.rows)

    def test_history_directions_are_projected_out(self):
        feat, quality = fitted_catalog(5)
        history = (2, 9, 17)
        factor = build_l_factor(
            LikelihoodSpec(method="cond_dpp", quality=quality, history=history),
            feat,
        )
        overlap = factor.diversity_rows @ feat.matrix_[list(history)].T
        np.testing.assert_allclose(overlap, 0.0, atol=1e-8)

    def test_history_rows_collapse_to_numerical_zero(self):
        feat, quality = fitted_catalog(6)
        factor = build_l_factor(
            LikelihoodSpec(method="cond_dpp", quality=quality, history=(3,)),
            feat,
        )
        assert np.linalg.norm(factor.diversity_rows[3]) < 1e-7

    def test_duplicate_history_rows_raise(self):
        rows = np.concatenate([np.eye(4), np.eye(4)[:1]], axis=0)
        feat = fit_nystroem(rows, rank=4, n_landmarks=5)
        spec = LikelihoodSpec(method="cond_dpp", quality=np.ones(5),
                              history=(0, 4))
        with pytest.raises(HistoryDegenerateError):
            build_l_factor(spec, feat)


class TestMarkov:
    def test_conditions_on_previous_batch_not_history(self):
        feat, quality = fitted_catalog(7)
        factor = build_l_factor(
            LikelihoodSpec(method="markov_dpp", quality=quality,
                           history=(0, 1), previous_batch=(5,)),
            feat,
        )
        overlap = factor.diversity_rows @ feat.matrix_[[5]].T
        np.testing.assert_allclose(overlap, 0.0, atol=1e-8)
        # history directions stay live
        assert np.abs(factor.diversity_rows[0] @ feat.matrix_[0]) > 1e-3

    def test_first_round_matches_plain_decomposition(self):
        feat, quality = fitted_catalog(8)
        plain = build_l_factor(
            LikelihoodSpec(method="qd_decomp", quality=quality), feat
        )
        markov = build_l_factor(
            LikelihoodSpec(method="markov_dpp", quality=quality,
                           previous_batch=()),
            feat,
        )
        np.testing.assert_array_equal(plain.rows, markov.rows)


class TestDenuded:
    def catalog(self):
        e1, e2 = np.eye(2)
        twin = np.array([0.95, np.sqrt(1 - 0.95**2)])
        rows = np.stack([e1, e1, twin, e2])
        feat = fit_nystroem(rows, rank=2, n_landmarks=4)
        index = build_index(feat)
        return feat, index

    def test_requires_neighbor_index(self):
        feat, _ = self.catalog()
        spec = LikelihoodSpec(method="b_divrec", quality=np.ones(4),
                              history=(0,))
        with pytest.raises(InvalidInputError):
            build_l_factor(spec, feat)

    def test_zero_alpha_silences_only_exact_duplicates(self):
        feat, index = self.catalog()
        spec = LikelihoodSpec(method="b_divrec", quality=np.ones(4),
                              history=(0,), alpha=0.0)
        factor = build_l_factor(spec, feat, index=index)
        np.testing.assert_allclose(factor.diversity_rows[0], 0.0, atol=1e-9)
        np.testing.assert_allclose(factor.diversity_rows[1], 0.0, atol=1e-9)
        np.testing.assert_allclose(
            factor.diversity_rows[2] @ factor.diversity_rows[2], 1.0, atol=1e-9
        )

    def test_wide_alpha_subtracts_near_twins(self):
        feat, index = self.catalog()
        spec = LikelihoodSpec(method="b_divrec", quality=np.ones(4),
                              history=(0,), alpha=0.2)
        factor = build_l_factor(spec, feat, index=index)
        # cosine 0.95 >= 1 - 0.2, so the twin loses its history component
        expected = feat.matrix_[2] - feat.matrix_[0]
        np.testing.assert_allclose(factor.diversity_rows[2], expected,
                                   atol=1e-8)
        # the orthogonal item is untouched either way
        np.testing.assert_allclose(factor.diversity_rows[3], feat.matrix_[3],
                                   atol=1e-9)

    def test_gate_includes_the_boundary_cosine(self):
        feat, index = self.catalog()
        spec = LikelihoodSpec(method="b_divrec", quality=np.ones(4),
                              history=(0,), alpha=0.05)
        factor = build_l_factor(spec, feat, index=index)
        # twin sits exactly on the 1 - alpha boundary and must trigger
        expected = feat.matrix_[2] - feat.matrix_[0]
        np.testing.assert_allclose(factor.diversity_rows[2], expected,
                                   atol=1e-8)

    def test_empty_history_matches_plain_decomposition(self):
        feat, quality = fitted_catalog(9)
        index = build_index(feat)
        plain = build_l_factor(
            LikelihoodSpec(method="qd_decomp", quality=quality), feat
        )
        denuded = build_l_factor(
            LikelihoodSpec(method="b_divrec", quality=quality, alpha=0.5),
            feat,
            index=index,
        )
        np.testing.assert_array_equal(plain.rows, denuded.rows)


class TestEpsilonGreedy:
    def test_certain_exploit_is_pure_quality(self):
        feat, quality = fitted_catalog(10, n=8)
        spec = LikelihoodSpec(method="eps_greedy", quality=quality,
                              epsilon=1.0)
        factor = build_l_factor(spec, feat, rng_seed=0, round_index=0)
        np.testing.assert_allclose(likelihood_of(factor),
                                   np.diag(quality**2), atol=1e-10)
        assert factor.lam == 0.5

    def test_certain_explore_ignores_quality(self):
        feat, quality = fitted_catalog(11, n=8)
        spec = LikelihoodSpec(method="eps_greedy", quality=quality,
                              epsilon=0.0)
        factor = build_l_factor(spec, feat, rng_seed=0, round_index=0)
        flat = build_l_factor(
            LikelihoodSpec(method="qd_decomp",
                           quality=np.ones_like(quality), lam=0.0),
            feat,
        )
        np.testing.assert_allclose(likelihood_of(factor), likelihood_of(flat),
                                   atol=1e-8)
        assert factor.lam == 0.0

    def test_coin_depends_only_on_seed_and_round(self):
        feat, quality = fitted_catalog(12, n=8)
        spec = LikelihoodSpec(method="eps_greedy", quality=quality,
                              epsilon=0.5)
        first = build_l_factor(spec, feat, rng_seed=7, round_index=3)
        again = build_l_factor(spec, feat, rng_seed=7, round_index=3)
        np.testing.assert_array_equal(first.rows, again.rows)

    def test_coin_flips_with_the_round(self):
        feat, quality = fitted_catalog(13, n=8)
        spec = LikelihoodSpec(method="eps_greedy", quality=quality,
                              epsilon=0.5)
        lams = {
            build_l_factor(spec, feat, rng_seed=1, round_index=r).lam
            for r in range(12)
        }
        assert lams == {0.0, 0.5}


class TestLFactor:
    def test_active_ids_skip_zeroed_rows(self):
        rows = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 2.0]])
        factor = LFactor(rows=rows, diversity_rows=rows,
                         quality=np.ones(3), lam=0.5)
        np.testing.assert_array_equal(factor.active_ids, [0, 2])

    def test_n_items_counts_all_rows(self):
        rows = np.zeros((4, 2))
        factor = LFactor(rows=rows, diversity_rows=rows,
                         quality=np.ones(4), lam=0.5)
        assert factor.n_items == 4
