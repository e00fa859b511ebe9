"""Unit tests for PCA/WPCA, cosine similarity, PLDA and score fusion."""

import numpy as np
import pytest

from dcpkit.core.errors import DimensionError
from dcpkit.models.enums import FusionMode
from dcpkit.services import learning
from dcpkit.services.learning import (
    ConditioningError,
    DegenerateTrainingError,
    PcaModel,
    UndefinedSimilarityError,
    cosine_matrix,
    cosine_pairs,
    cosine_sim,
    fusion_fit,
    fusion_score,
    pca_fit,
    pca_project,
    plda_fit,
    plda_llr,
    plda_llr_matrix,
    plda_llr_pairs,
    wpca_project,
)


def plda_samples(rng, n_ids=30, per_id=4, d=10, d_h=2, d_w=2):
    F = rng.normal(0.0, 2.0, (d, d_h))
    G = rng.normal(0.0, 1.0, (d, d_w))
    X, labels = [], []
    for i in range(n_ids):
        h = rng.normal(size=d_h)
        for _ in range(per_id):
            X.append(5.0 + F @ h + G @ rng.normal(size=d_w) + rng.normal(0.0, 0.3, d))
            labels.append(i)
    return np.array(X), labels


# ============================================================================
# PCA / WPCA
# ============================================================================


@pytest.mark.unit
class TestPca:
    def test_whitening_gives_identity_covariance(self, rng):
        X = rng.normal(size=(500, 50)) * np.linspace(0.5, 5.0, 50)
        m = pca_fit(X, d_out=20)
        Y = wpca_project(m, X)
        np.testing.assert_allclose(Y.T @ Y / (500 - 1), np.eye(20), atol=1e-6)

    def test_basis_orthonormal_and_eigenvalues_sorted(self, rng):
        m = pca_fit(rng.normal(size=(100, 12)), d_out=8)
        np.testing.assert_allclose(m.basis.T @ m.basis, np.eye(8), atol=1e-10)
        assert np.all(np.diff(m.eigenvalues) <= 0)
        assert (m.d_in, m.d_out) == (12, 8)

    def test_gram_route_matches_svd(self, rng):
        X = rng.normal(size=(15, 80))
        m = pca_fit(X)
        assert m.d_out == 14
        Xc = X - X.mean(axis=0)
        _, s, vt = np.linalg.svd(Xc, full_matrices=False)
        np.testing.assert_allclose(m.eigenvalues, s[:14] ** 2 / 14, rtol=1e-9)
        # columns agree up to sign, which pca_fit fixes deterministically
        np.testing.assert_allclose(np.abs(m.basis.T @ vt[:14].T), np.eye(14), atol=1e-8)

    def test_gram_chunking_is_exact(self, rng, monkeypatch):
        X = rng.normal(size=(12, 40))
        whole = pca_fit(X, d_out=5)
        monkeypatch.setattr(learning, "GRAM_CHUNK", 7)
        chunked = pca_fit(X, d_out=5)
        np.testing.assert_allclose(chunked.basis, whole.basis, atol=1e-10)
        np.testing.assert_allclose(chunked.eigenvalues, whole.eigenvalues, rtol=1e-10)

    def test_signs_are_deterministic(self, rng):
        X = rng.normal(size=(60, 6))
        m = pca_fit(X)
        idx = np.argmax(np.abs(m.basis), axis=0)
        assert np.all(m.basis[idx, np.arange(m.d_out)] > 0)

    def test_projection_centers(self, rng):
        X = rng.normal(size=(40, 5))
        m = pca_fit(X, d_out=3)
        np.testing.assert_allclose(pca_project(m, X).mean(axis=0), 0.0, atol=1e-12)

    @pytest.mark.parametrize("d_out", [0, 10])
    def test_d_out_range(self, rng, d_out):
        with pytest.raises(DimensionError):
            pca_fit(rng.normal(size=(10, 4)), d_out=d_out)

    def test_single_sample(self):
        with pytest.raises(DimensionError):
            pca_fit(np.ones((1, 4)))

    def test_projection_dim_checked(self, rng):
        m = pca_fit(rng.normal(size=(10, 4)), d_out=2)
        with pytest.raises(DimensionError):
            pca_project(m, np.zeros(5))

    def test_repeated_samples_fail_without_truncation(self, rng):
        X = np.repeat(rng.random((3, 5000)), 3, axis=0)
        with pytest.raises(ConditioningError):
            pca_fit(X, d_out=8)

    def test_repeated_samples_truncate_to_rank(self, rng):
        # three distinct rows, repeated: the centered data has rank 2
        X = np.repeat(rng.random((3, 5000)), 3, axis=0)
        m = pca_fit(X, d_out=8, truncate_to_rank=True)
        assert m.d_out == 2
        Y = wpca_project(m, X)
        assert np.all(np.isfinite(Y))
        np.testing.assert_allclose(Y[0], Y[2], atol=1e-8)

    def test_covariance_route_truncates_to_rank(self, rng):
        X = rng.normal(size=(40, 2)) @ rng.normal(size=(2, 6))
        m = pca_fit(X, truncate_to_rank=True)
        assert m.d_out == 2
        np.testing.assert_allclose(m.basis.T @ m.basis, np.eye(2), atol=1e-10)

    def test_truncation_keeps_full_rank_data(self, rng):
        X = rng.normal(size=(15, 80))
        assert pca_fit(X, d_out=10, truncate_to_rank=True).d_out == 10

    def test_identical_samples_have_no_subspace(self):
        with pytest.raises(ConditioningError):
            pca_fit(np.ones((4, 50)), truncate_to_rank=True)

    def test_whitening_rejects_degenerate_eigenvalue(self):
        m = PcaModel(mean=np.zeros(2), basis=np.eye(2), eigenvalues=np.array([1.0, 0.0]))
        with pytest.raises(ConditioningError):
            wpca_project(m, np.ones(2))


@pytest.mark.unit
class TestCosine:
    def test_values(self):
        assert cosine_sim([1.0, 0.0], [0.0, 2.0]) == pytest.approx(0.0)
        assert cosine_sim([1.0, 1.0], [2.0, 2.0]) == pytest.approx(1.0)

    def test_zero_vector_is_undefined(self):
        with pytest.raises(UndefinedSimilarityError):
            cosine_sim([0.0, 0.0], [1.0, 0.0])

    def test_matrix_and_pairs_agree_with_scalar(self, rng):
        A, B = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
        M = cosine_matrix(A, B)
        p = cosine_pairs(A, B)
        for i in range(4):
            assert p[i] == pytest.approx(cosine_sim(A[i], B[i]))
            for j in range(4):
                assert M[i, j] == pytest.approx(cosine_sim(A[i], B[j]))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            cosine_sim([1.0, 2.0], [1.0, 2.0, 3.0])


# ============================================================================
# PLDA
# ============================================================================


@pytest.mark.unit
class TestPlda:
    def test_log_likelihood_is_monotone(self, rng):
        X, labels = plda_samples(rng)
        m = plda_fit(X, labels, d_h=2, d_w=2, iters=15)
        trace = np.array(m.log_likelihoods)
        assert trace.shape == (16,)
        assert np.all(np.diff(trace) >= -1e-6 * np.abs(trace[:-1]))

    def test_fit_is_seed_deterministic(self, rng):
        X, labels = plda_samples(rng)
        a = plda_fit(X, labels, 2, 2, iters=5, seed=3)
        b = plda_fit(X, labels, 2, 2, iters=5, seed=3)
        np.testing.assert_array_equal(a.F, b.F)
        np.testing.assert_array_equal(a.noise_var, b.noise_var)

    def test_llr_separates_identities(self, rng):
        X, labels = plda_samples(rng)
        m = plda_fit(X, labels, d_h=2, d_w=2, iters=20)
        same = [plda_llr(m, X[4 * i], X[4 * i + 1]) for i in range(30)]
        diff = [plda_llr(m, X[4 * i], X[4 * ((i + 1) % 30)]) for i in range(30)]
        assert np.mean(same) > np.mean(diff)

    def test_llr_symmetric_and_batched(self, rng):
        X, labels = plda_samples(rng, n_ids=10)
        m = plda_fit(X, labels, 2, 2, iters=5)
        assert plda_llr(m, X[0], X[5]) == pytest.approx(plda_llr(m, X[5], X[0]))
        M = plda_llr_matrix(m, X[:3], X[3:6])
        p = plda_llr_pairs(m, X[:3], X[3:6])
        for i in range(3):
            assert p[i] == pytest.approx(M[i, i])
            for j in range(3):
                assert M[i, j] == pytest.approx(plda_llr(m, X[i], X[3 + j]))

    def test_single_identity(self, rng):
        with pytest.raises(DegenerateTrainingError):
            plda_fit(rng.normal(size=(5, 4)), [0] * 5, 1, 1)

    def test_no_repeated_identity(self, rng):
        with pytest.raises(DegenerateTrainingError):
            plda_fit(rng.normal(size=(5, 4)), list(range(5)), 1, 1)

    def test_subspace_dims_checked(self, rng):
        X, labels = plda_samples(rng, n_ids=5, d=4)
        with pytest.raises(DimensionError):
            plda_fit(X, labels, d_h=5, d_w=1)

    def test_llr_dim_checked(self, rng):
        X, labels = plda_samples(rng, n_ids=5)
        m = plda_fit(X, labels, 2, 2, iters=2)
        with pytest.raises(DimensionError):
            plda_llr(m, X[0], X[1][:-1])


# ============================================================================
# Fusion
# ============================================================================


@pytest.mark.unit
class TestFusion:
    def test_average_is_plain_mean(self):
        m = fusion_fit(np.zeros((3, 4)), [True, False, True])
        np.testing.assert_allclose(m.weights, 0.25)
        assert m.bias == 0.0
        assert fusion_score(m, [1.0, 2.0, 3.0, 6.0]) == pytest.approx(3.0)

    def test_linear_weights_follow_the_informative_scorer(self, rng):
        y = rng.random(400) < 0.5
        informative = np.where(y, 1.0, -1.0) + rng.normal(0.0, 0.5, 400)
        noise = rng.normal(0.0, 3.0, 400)
        S = np.column_stack([informative, noise])
        m = fusion_fit(S, y, c=1.0, mode=FusionMode.LINEAR)
        assert m.weights[0] > 0
        assert abs(m.weights[0]) > abs(m.weights[1])
        accuracy = np.mean((fusion_score(m, S) > 0) == y)
        assert accuracy > 0.9

    def test_linear_needs_both_classes(self):
        with pytest.raises(DegenerateTrainingError):
            fusion_fit(np.ones((4, 2)), [True] * 4, mode=FusionMode.LINEAR)

    def test_label_count_checked(self):
        with pytest.raises(DimensionError):
            fusion_fit(np.ones((4, 2)), [True, False], mode=FusionMode.LINEAR)

    def test_score_width_checked(self):
        m = fusion_fit(np.zeros((2, 3)), [True, False])
        with pytest.raises(DimensionError):
            fusion_score(m, [1.0, 2.0])
