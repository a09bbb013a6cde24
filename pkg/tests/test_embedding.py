import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from typsgd.data import generate_clustered
from typsgd.embedding import (
    conditional_affinities,
    load_embedding_points,
    pairwise_sq_distances,
    save_embedding,
    tsne_embed,
)
from typsgd.errors import InvalidArgumentError


class TestPairwiseDistances:
    def test_hand_example(self):
        assert np.array_equal(pairwise_sq_distances(np.array([[0.0], [3.0]])), [[0.0, 9.0], [9.0, 0.0]])

    def test_identical_rows(self):
        points = np.tile([1.0, 2.0, 3.0], (4, 1))
        assert np.all(pairwise_sq_distances(points) == 0.0)

    @given(arrays(np.float64, (5, 3), elements=st.floats(-10, 10)))
    @settings(max_examples=50, deadline=None)
    def test_matches_double_loop(self, points):
        got = pairwise_sq_distances(points)
        for i in range(5):
            for j in range(5):
                want = float(np.sum((points[i] - points[j]) ** 2))
                assert abs(got[i, j] - want) <= 1e-12 * max(1.0, want)
        assert np.array_equal(got, got.T)
        assert np.all(np.diag(got) == 0.0)


class TestAffinities:
    def test_row_sums_and_achieved_perplexity(self, rng):
        points = rng.normal(size=(50, 4))
        cond, achieved = conditional_affinities(pairwise_sq_distances(points), 12.0)
        assert np.allclose(cond.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(np.diag(cond) == 0.0)
        assert np.max(np.abs(achieved - 12.0)) <= 1e-4

    def test_symmetrized_distribution_sums_to_one(self, rng):
        points = rng.normal(size=(30, 3))
        cond, _ = conditional_affinities(pairwise_sq_distances(points), 8.0)
        p_sym = (cond + cond.T) / (2 * 30)
        assert abs(p_sym.sum() - 1.0) <= 1e-9


class TestTsne:
    def test_perplexity_preconditions(self):
        # N = 4 admits no perplexity: [3, (N-1)/3] = [3, 1] is empty
        pair = np.array([[0.0, 0.0], [0.01, 0.0], [100.0, 0.0], [100.01, 0.0]])
        with pytest.raises(InvalidArgumentError):
            tsne_embed(pair, perplexity=1.0, iterations=10)
        with pytest.raises(InvalidArgumentError):
            tsne_embed(np.random.default_rng(0).normal(size=(30, 2)), perplexity=20.0, iterations=10)

    def test_separates_two_far_clusters(self):
        # 20-sigma separated clusters stay linearly separable after embedding;
        # oracle: exhaustive direction search over 360 angles
        data = generate_clustered(60, 3, [[0.0] * 3, [10.0] * 3], [0.5, 0.5], 0.5, seed=4)
        emb = tsne_embed(data, perplexity=10.0, iterations=400, seed=1)
        labels = data.targets[:, 0]
        best_margin = -np.inf
        for angle in np.linspace(0.0, np.pi, 360, endpoint=False):
            proj = emb.points @ np.array([np.cos(angle), np.sin(angle)])
            # separable along this direction if either cluster sits wholly
            # above the other
            margin = max(proj[labels == 0].min() - proj[labels == 1].max(),
                         proj[labels == 1].min() - proj[labels == 0].max())
            best_margin = max(best_margin, margin)
        assert best_margin > 0.0

    def test_kl_trace_tail_non_increasing(self):
        # converged-descent property: run long enough for the momentum
        # transient to die out
        data = generate_clustered(50, 2, [[0.0, 0.0], [4.0, 4.0]], [0.5, 0.5], 0.8, seed=3)
        emb = tsne_embed(data, perplexity=8.0, iterations=800, seed=2)
        kls = [kl for _, kl in emb.kl_trace]
        assert all(k >= 0.0 and np.isfinite(k) for k in kls)
        tail = kls[-100:]
        for before, after in zip(tail, tail[1:]):
            assert after <= before + 1e-3

    def test_output_recentred(self, rng):
        emb = tsne_embed(rng.normal(size=(25, 3)), perplexity=5.0, iterations=60, seed=0)
        assert np.linalg.norm(emb.points.mean(axis=0)) <= 1e-9

    def test_bit_identical_reruns(self, rng):
        data = rng.normal(size=(20, 3))
        a = tsne_embed(data, perplexity=4.0, iterations=50, seed=9)
        b = tsne_embed(data, perplexity=4.0, iterations=50, seed=9)
        assert np.array_equal(a.points, b.points)
        assert a.kl_trace == b.kl_trace

    def test_embedding_round_trip(self, tmp_path, rng):
        emb = tsne_embed(rng.normal(size=(15, 2)), perplexity=3.0, iterations=30, seed=1)
        path = tmp_path / "embedding.csv"
        save_embedding(path, emb)
        assert np.array_equal(load_embedding_points(path), emb.points)
