"""Low-rank feature maps: exactness at full rank, truncation, log-volumes."""

import numpy as np
import pytest
from sklearn.base import clone

from divrec.data import generate_synthetic
from divrec.exceptions import InvalidInputError
from divrec.features import NystroemFeatureMap, fit_nystroem, log_volume
from divrec.kernels import KernelSpec, kernel_matrix
from divrec.validation import normalize_rows


def unit_rows(seed, n=40, d=8):
    rng = np.random.default_rng(seed)
    return normalize_rows(rng.normal(size=(n, d)), "rows")


class TestFit:
    def test_full_landmarks_reproduce_linear_kernel(self):
        rows = unit_rows(0, n=30, d=6)
        feat = fit_nystroem(rows, rank=30, n_landmarks=30)
        gram = feat.matrix_ @ feat.matrix_.T
        np.testing.assert_allclose(gram, rows @ rows.T, atol=1e-8)

    def test_full_landmarks_reproduce_rbf_kernel(self):
        rows = unit_rows(1, n=25, d=5)
        feat = fit_nystroem(rows, rank=25, n_landmarks=25,
                            kernel="rbf", bandwidth=0.8)
        expected = kernel_matrix(KernelSpec("rbf", bandwidth=0.8), rows, rows)
        np.testing.assert_allclose(feat.matrix_ @ feat.matrix_.T, expected,
                                   atol=1e-8)

    def test_rank_truncation_bounds_feature_width(self):
        rows = unit_rows(2, n=50, d=10)
        feat = fit_nystroem(rows, rank=4, n_landmarks=20)
        assert feat.matrix_.shape == (50, 4)
        assert feat.rank_ <= 4

    def test_linear_rank_capped_by_dimension(self):
        rows = unit_rows(3, n=40, d=6)
        feat = fit_nystroem(rows, rank=30, n_landmarks=40)
        assert feat.rank_ <= 6

    def test_fit_accepts_item_store(self):
        store, _ = generate_synthetic(60, 8, 3, 2, seed=4)
        feat = NystroemFeatureMap(rank=8, random_state=0).fit(store)
        assert feat.n_items_ == 60

    def test_same_seed_same_features(self):
        rows = unit_rows(5)
        a = fit_nystroem(rows, rank=6, seed=11, n_landmarks=15)
        b = fit_nystroem(rows, rank=6, seed=11, n_landmarks=15)
        np.testing.assert_array_equal(a.matrix_, b.matrix_)

    def test_get_params_round_trips_through_clone(self):
        feat = NystroemFeatureMap(kernel="rbf", bandwidth=0.5, rank=7,
                                  n_landmarks=12, random_state=3)
        twin = clone(feat)
        assert twin.get_params() == feat.get_params()

    def test_transform_before_fit_raises(self):
        with pytest.raises(InvalidInputError):
            NystroemFeatureMap().transform(np.ones((2, 4)))


class TestReconstruct:
    def test_reconstruct_matches_kernel_block(self):
        rows = unit_rows(6, n=20, d=5)
        feat = fit_nystroem(rows, rank=20, n_landmarks=20)
        block = feat.reconstruct([1, 3, 5], [2, 4])
        np.testing.assert_allclose(block, rows[[1, 3, 5]] @ rows[[2, 4]].T,
                                   atol=1e-8)

    def test_single_argument_gives_square_block(self):
        rows = unit_rows(7, n=15, d=4)
        feat = fit_nystroem(rows, rank=15, n_landmarks=15)
        block = feat.reconstruct([0, 2])
        np.testing.assert_allclose(block, block.T, atol=1e-12)
        assert block.shape == (2, 2)


class TestLogVolume:
    def test_empty_subset_is_zero(self):
        rows = unit_rows(8)
        feat = fit_nystroem(rows, rank=8)
        assert log_volume(feat, []) == 0.0

    def test_duplicate_ids_give_minus_inf(self):
        rows = unit_rows(9)
        feat = fit_nystroem(rows, rank=8)
        assert log_volume(feat, [3, 3]) == -np.inf

    def test_matches_exact_gram_logdet(self):
        rows = unit_rows(10, n=30, d=7)
        feat = fit_nystroem(rows, rank=30, n_landmarks=30)
        rng = np.random.default_rng(10)
        for _ in range(20):
            ids = rng.choice(30, size=int(rng.integers(1, 6)), replace=False)
            gram = rows[ids] @ rows[ids].T
            expected = 0.5 * float(np.linalg.slogdet(gram)[1])
            np.testing.assert_allclose(log_volume(feat, ids), expected,
                                       atol=1e-7)

    def test_orthogonal_pair_has_zero_log_volume(self):
        rows = np.eye(4)
        feat = fit_nystroem(rows, rank=4, n_landmarks=4)
        np.testing.assert_allclose(log_volume(feat, [0, 1]), 0.0, atol=1e-9)
