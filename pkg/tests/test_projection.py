import numpy as np
import pytest

from retainex.numerics import ArgumentError, make_rng
from retainex.projection import Embedding2D, ProjectionConfig, pca_2d, tsne_2d


def silhouette(points: np.ndarray, labels: np.ndarray) -> float:
    """Tiny brute-force silhouette over euclidean distances."""
    n = len(points)
    dist = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    vals = []
    for i in range(n):
        same = labels == labels[i]
        same[i] = False
        a = dist[i, same].mean()
        b = min(
            dist[i, labels == other].mean()
            for other in np.unique(labels)
            if other != labels[i]
        )
        vals.append((b - a) / max(a, b))
    return float(np.mean(vals))


def two_blobs(n_per=20, dim=10, separation=10.0, seed=0):
    rng = make_rng(seed)
    a = rng.standard_normal((n_per, dim))
    b = rng.standard_normal((n_per, dim))
    b[:, 0] += separation
    X = np.vstack([a, b])
    labels = np.array([0] * n_per + [1] * n_per)
    return X, labels


class TestPca:
    def test_rank_one_data_has_flat_second_axis(self):
        rng = make_rng(1)
        direction = rng.standard_normal(8)
        coeffs = rng.standard_normal(30)
        X = np.outer(coeffs, direction)
        emb = pca_2d(X)
        assert np.max(np.abs(emb.points[:, 1])) <= 1e-8

    def test_duplicate_rows_map_identically(self):
        rng = make_rng(2)
        X = rng.standard_normal((10, 5))
        X[7] = X[3]
        emb = pca_2d(X)
        np.testing.assert_array_equal(emb.points[7], emb.points[3])

    def test_planar_distances_preserved(self):
        # a right triangle already in 2-D must embed isometrically
        X = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]])
        emb = pca_2d(X)

        def dmat(P):
            return np.linalg.norm(P[:, None] - P[None, :], axis=2)

        np.testing.assert_allclose(dmat(emb.points), dmat(X), atol=1e-8)

    def test_deterministic_bitwise(self):
        X = make_rng(3).standard_normal((40, 12))
        a, b = pca_2d(X), pca_2d(X)
        np.testing.assert_array_equal(a.points, b.points)

    def test_centered(self):
        X = make_rng(4).standard_normal((25, 6)) + 5.0
        emb = pca_2d(X)
        np.testing.assert_allclose(emb.points.mean(axis=0), 0.0, atol=1e-9)

    def test_single_point_rejected(self):
        with pytest.raises(ArgumentError):
            pca_2d(np.ones((1, 3)))


class TestTsne:
    def test_same_seed_identical(self):
        X, _ = two_blobs(n_per=10, dim=5, seed=5)
        cfg = ProjectionConfig(perplexity=5, iterations=300, seed=9)
        a = tsne_2d(X, cfg)
        b = tsne_2d(X, cfg)
        np.testing.assert_array_equal(a.points, b.points)

    def test_identical_inputs_get_identical_affinity_rows(self):
        # rows 0..2 are one point repeated; 3..5 another. Identical inputs
        # must distribute mass identically (up to the zeroed diagonal).
        X = np.ones((6, 4))
        X[3:] = 2.0
        from retainex import kernels

        D2 = ((X[:, None] - X[None, :]) ** 2).sum(-1)
        P = kernels.binary_search_affinities(D2, np.log(1.5), 1e-5, 100)
        np.testing.assert_allclose(P[0, 3:], P[1, 3:], atol=1e-12)
        assert P[0, 1] == pytest.approx(P[1, 0], abs=1e-12)
        assert P[0, 2] == pytest.approx(P[1, 2], abs=1e-12)

    def test_separated_blobs_stay_separated(self):
        X, labels = two_blobs(n_per=20, dim=10, separation=10.0, seed=0)
        cfg = ProjectionConfig(perplexity=10, iterations=500, seed=0)
        emb = tsne_2d(X, cfg)
        assert silhouette(emb.points, labels) > 0.5

    def test_infeasible_perplexity_rejected(self):
        X = make_rng(0).standard_normal((10, 3))
        with pytest.raises(ArgumentError, match="perplexity"):
            tsne_2d(X, ProjectionConfig(perplexity=30))

    def test_all_coordinates_finite(self):
        X = make_rng(1).standard_normal((25, 8))
        emb = tsne_2d(X, ProjectionConfig(perplexity=7, iterations=300, seed=1))
        assert np.all(np.isfinite(emb.points))

    def test_too_few_points_rejected(self):
        with pytest.raises(ArgumentError):
            tsne_2d(np.ones((3, 3)), ProjectionConfig(perplexity=0.5))


class TestConfig:
    def test_bad_method_rejected(self):
        with pytest.raises(ArgumentError):
            ProjectionConfig(method="umap")

    def test_min_iterations(self):
        with pytest.raises(ArgumentError):
            ProjectionConfig(iterations=100)
