import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from capgap.embeddings import (Embedding, EmbeddingSet, centroid, cosine_similarity,
                               gap_vector, kahan_mean, l2_normalize, linf_norm)

finite_vec = arrays(np.float64, st.integers(2, 8),
                    elements=st.floats(-100, 100, allow_nan=False)).filter(
                        lambda v: np.linalg.norm(v) > 1e-6)


def E(*values):
    return Embedding(np.array(values, dtype=float))


class TestCosineSimilarity:
    def test_identical(self):
        assert cosine_similarity(E(1, 0), E(1, 0)) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_similarity(E(1, 0), E(0, 1)) == pytest.approx(0.0)

    def test_diagonal(self):
        # hand evaluation: (1*1 + 1*0) / (sqrt(2) * 1)
        assert cosine_similarity(E(1, 1), E(1, 0)) == pytest.approx(0.7071, abs=1e-4)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            cosine_similarity(E(1, 0), E(1, 0, 0))

    def test_zero_norm_is_error_not_nan(self):
        with pytest.raises(ValueError, match="zero-norm"):
            cosine_similarity(E(0, 0), E(1, 0))

    @given(finite_vec)
    def test_self_similarity(self, v):
        assert cosine_similarity(Embedding(v), Embedding(v)) == pytest.approx(1.0, abs=1e-6)

    @given(finite_vec, st.floats(0.01, 50))
    def test_scale_invariance_and_symmetry(self, v, alpha):
        a, b = Embedding(v), Embedding(np.roll(v, 1) + 0.5)
        s = cosine_similarity(a, b)
        assert cosine_similarity(b, a) == pytest.approx(s, abs=1e-12)
        assert cosine_similarity(Embedding(alpha * v), b) == pytest.approx(s, abs=1e-9)


class TestL2Normalize:
    def test_three_four_five(self):
        np.testing.assert_allclose(l2_normalize(E(3, 4)).values, [0.6, 0.8])

    def test_unit_vector_fixed_point(self):
        np.testing.assert_allclose(l2_normalize(E(1, 0)).values, [1, 0])

    def test_sign_preserved(self):
        np.testing.assert_allclose(l2_normalize(E(-2, 0)).values, [-1, 0])

    def test_zero_vector_error(self):
        with pytest.raises(ValueError):
            l2_normalize(E(0, 0))

    @given(finite_vec)
    def test_idempotent(self, v):
        once = l2_normalize(Embedding(v))
        twice = l2_normalize(once)
        np.testing.assert_allclose(twice.values, once.values, atol=1e-6)
        assert np.linalg.norm(once.values) == pytest.approx(1.0, abs=1e-6)


class TestCentroid:
    def test_two_points(self):
        s = EmbeddingSet.from_matrix([[1, 0], [0, 1]])
        np.testing.assert_allclose(centroid(s).values, [0.5, 0.5])

    def test_singleton(self):
        s = EmbeddingSet.from_matrix([[2.5, -1.0]])
        np.testing.assert_allclose(centroid(s).values, [2.5, -1.0])

    def test_empty_error(self):
        with pytest.raises(ValueError):
            centroid(EmbeddingSet(dim=2, items=[]))

    def test_monte_carlo_recovers_mean(self):
        rng = np.random.default_rng(123)
        mu = np.array([0.3, -0.7, 1.1])
        samples = rng.normal(mu, 0.01, size=(100, 3))
        c = centroid(EmbeddingSet.from_matrix(samples, modality="text"))
        assert np.max(np.abs(c.values - mu)) < 0.01

    @given(st.permutations(list(range(6))))
    def test_permutation_invariant(self, perm):
        rng = np.random.default_rng(9)
        mat = rng.normal(size=(6, 3))
        base = centroid(EmbeddingSet.from_matrix(mat)).values
        shuffled = centroid(EmbeddingSet.from_matrix(mat[perm])).values
        np.testing.assert_allclose(shuffled, base, atol=1e-12)


class TestGapVector:
    def test_identical_sets_zero(self):
        mat = np.random.default_rng(0).normal(size=(5, 3))
        a = EmbeddingSet.from_matrix(mat, modality="audio")
        t = EmbeddingSet.from_matrix(mat, modality="text")
        np.testing.assert_array_equal(gap_vector(a, t).values, np.zeros(3))

    def test_planted_offset_noise_free(self):
        rng = np.random.default_rng(1)
        text = rng.normal(size=(20, 4))
        g = np.array([0.5, -0.2, 0.0, 1.0])
        audio = text + g
        delta = gap_vector(EmbeddingSet.from_matrix(audio, modality="audio"),
                           EmbeddingSet.from_matrix(text, modality="text"))
        np.testing.assert_allclose(delta.values, g, atol=1e-12)
        assert delta.n_pairs == 20

    def test_planted_offset_under_noise_many_seeds(self):
        # per-coordinate error of the mean of n noisy pairs stays within
        # 4 * s * sqrt(2 / n)
        n, s, d = 80, 0.05, 6
        bound = 4 * s * np.sqrt(2 / n)
        for seed in range(20):
            rng = np.random.default_rng(seed)
            text = rng.normal(size=(n, d))
            g = rng.normal(size=d)
            audio = text + g + rng.normal(0, s, size=(n, d))
            delta = gap_vector(EmbeddingSet.from_matrix(audio, modality="audio"),
                               EmbeddingSet.from_matrix(text, modality="text"))
            assert np.max(np.abs(delta.values - g)) <= bound

    def test_antisymmetric(self):
        rng = np.random.default_rng(2)
        a = EmbeddingSet.from_matrix(rng.normal(size=(4, 3)), modality="audio")
        t = EmbeddingSet.from_matrix(rng.normal(size=(7, 3)), modality="text")
        ab = gap_vector(a, t).values
        # swapping the sets flips the sign (modality labels do not matter here)
        a2 = EmbeddingSet.from_matrix(t.matrix, modality="audio")
        t2 = EmbeddingSet.from_matrix(a.matrix, modality="text")
        np.testing.assert_allclose(gap_vector(a2, t2).values, -ab, atol=1e-12)

    def test_errors(self):
        a = EmbeddingSet.from_matrix([[1, 0]], modality="audio")
        with pytest.raises(ValueError):
            gap_vector(a, EmbeddingSet(dim=2, items=[], modality="text"))
        t3 = EmbeddingSet.from_matrix([[1, 0, 0]], modality="text")
        with pytest.raises(ValueError, match="mismatch"):
            gap_vector(a, t3)


class TestLinfNorm:
    def test_hand_case(self):
        assert linf_norm(E(0.2, -0.7, 0.1)) == pytest.approx(0.7)

    def test_zero(self):
        assert linf_norm(E(0, 0)) == 0.0

    def test_difference_of_equal(self):
        v = E(1.5, -2.5, 3.5)
        assert linf_norm(Embedding(v.values - v.values)) == 0.0


class TestInvariants:
    def test_embedding_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Embedding(np.array([1.0, np.nan]))

    def test_set_rejects_duplicate_ids(self):
        with pytest.raises(ValueError, match="duplicate"):
            EmbeddingSet(dim=2, items=[E(1, 0), E(0, 1)])  # both default id ""

    def test_set_rejects_wrong_dim(self):
        with pytest.raises(ValueError):
            EmbeddingSet(dim=3, items=[Embedding(np.ones(2), id="x")])

    def test_normalized_flag_checked(self):
        with pytest.raises(ValueError, match="normalized"):
            EmbeddingSet(dim=2, items=[Embedding(np.array([3.0, 4.0]), id="x")],
                         normalized=True)

    def test_kahan_mean_matches_fsum(self):
        import math
        rng = np.random.default_rng(4)
        mat = rng.normal(size=(1000, 3)) * np.array([1e-8, 1.0, 1e8])
        ours = kahan_mean(mat)
        ref = np.array([math.fsum(mat[:, j]) / mat.shape[0] for j in range(3)])
        np.testing.assert_allclose(ours, ref, rtol=1e-14)
