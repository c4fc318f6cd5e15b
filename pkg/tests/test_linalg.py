import numpy as np
import pytest

from elsd.errors import InvalidInputError, InvalidParameterError
from elsd.linalg import (
    FrameMatrix,
    norms,
    numerical_rank,
    shrink_singular_values,
    svt,
    svt_factors,
    thin_svd,
)


class TestFrameMatrix:
    def test_geometry_checks(self):
        fm = FrameMatrix(np.zeros((12, 3)) + 0.5, 4, 3)
        assert fm.n_pixels == 12 and fm.n_frames == 3
        assert fm.frame(0).shape == (4, 3)
        with pytest.raises(InvalidInputError):
            FrameMatrix(np.zeros((12, 3)), 4, 4)
        with pytest.raises(InvalidInputError):
            FrameMatrix(np.full((4, 1), np.nan), 2, 2)

    def test_from_frames_mismatch(self):
        with pytest.raises(InvalidInputError, match="frame 1"):
            FrameMatrix.from_frames([np.zeros((2, 2)), np.zeros((3, 3))])


class TestThinSvd:
    def test_identity(self):
        f = thin_svd(np.eye(3))
        assert np.allclose(f.sigma, [1.0, 1.0, 1.0])

    def test_rank_one_scaling(self):
        u = np.array([2.0, 0.0, 0.0])
        v = np.array([0.0, 3.0])
        f = thin_svd(np.outer(u, v))
        assert abs(f.sigma[0] - 6.0) < 1e-12
        assert np.all(f.sigma[1:] < 1e-12)

    def test_reconstruction_random(self):
        rng = np.random.default_rng(0)
        for shape in [(8, 5), (5, 8), (50, 50), (200, 200), (200, 30)]:
            M = rng.normal(size=shape)
            f = thin_svd(M)
            rel = np.linalg.norm(f.reconstruct() - M) / np.linalg.norm(M)
            assert rel <= 1e-10
            k = min(shape)
            assert f.sigma.shape == (k,)
            assert np.all(np.diff(f.sigma) <= 0) and np.all(f.sigma >= 0)
            assert np.linalg.norm(f.U.T @ f.U - np.eye(k)) <= 1e-10 * k
            assert np.linalg.norm(f.V.T @ f.V - np.eye(k)) <= 1e-10 * k

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidInputError):
            thin_svd(np.array([[1.0, np.inf]]))


class TestShrink:
    def test_examples(self):
        assert np.allclose(shrink_singular_values([5, 3, 1], 1.0), [4, 2, 0])
        assert np.allclose(shrink_singular_values([0.5], 1.0), [0.0])
        assert np.allclose(shrink_singular_values([2, 2, 2], 0.5),
                           [1.5, 1.5, 1.5])

    def test_preserves_order(self):
        rng = np.random.default_rng(1)
        sigma = np.sort(rng.uniform(0, 5, size=20))[::-1]
        out = shrink_singular_values(sigma, 0.7)
        assert np.all(np.diff(out) <= 0)

    def test_bad_threshold(self):
        with pytest.raises(InvalidParameterError):
            shrink_singular_values([1.0], 0.0)
        with pytest.raises(InvalidInputError):
            shrink_singular_values([-1.0], 1.0)


class TestSvt:
    def test_diagonal(self):
        B, rank = svt(np.diag([5.0, 3.0, 1.0]), 2.0)
        assert np.allclose(B, np.diag([3.0, 1.0, 0.0]), atol=1e-12)
        assert rank == 2

    def test_over_threshold(self):
        rng = np.random.default_rng(2)
        G = rng.normal(size=(6, 4))
        B, rank = svt(G, np.linalg.norm(G, 2) * 1.01)
        assert np.allclose(B, 0.0)
        assert rank == 0

    def test_nuclear_norm_nonincreasing(self):
        rng = np.random.default_rng(3)
        G = rng.normal(size=(10, 6))
        B, _ = svt(G, 0.5)
        assert np.linalg.svd(B, compute_uv=False).sum() \
            <= np.linalg.svd(G, compute_uv=False).sum()

    def test_perturbation_optimality(self):
        # SVT minimizes t*||B||_* + 0.5*||G-B||_F^2; no random perturbation
        # of size 1e-3 may improve the objective.
        rng = np.random.default_rng(4)
        G = rng.normal(size=(10, 6))
        t = 0.1 * np.linalg.norm(G, 2)
        B, _ = svt(G, t)

        def objective(X):
            return t * np.linalg.svd(X, compute_uv=False).sum() \
                + 0.5 * np.linalg.norm(G - X) ** 2

        base = objective(B)
        for _ in range(200):
            delta = rng.normal(size=G.shape)
            delta *= 1e-3 / np.linalg.norm(delta)
            assert objective(B + delta) >= base - 1e-12

    def test_nonexpansive(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            G1 = rng.normal(size=(7, 5))
            G2 = G1 + rng.normal(size=(7, 5)) * rng.uniform(0.01, 2)
            B1, _ = svt(G1, 0.8)
            B2, _ = svt(G2, 0.8)
            assert np.linalg.norm(B1 - B2) <= np.linalg.norm(G1 - G2) + 1e-12

    def test_factors_variant_matches(self):
        rng = np.random.default_rng(6)
        G = rng.normal(size=(8, 8))
        B1, rank = svt(G, 0.3)
        B2, shrunk = svt_factors(G, 0.3)
        assert np.allclose(B1, B2)
        assert rank == np.count_nonzero(shrunk > 0)


class TestNorms:
    def test_identity(self):
        m = norms(np.eye(2))
        assert np.isclose(m.frobenius, np.sqrt(2))
        assert np.isclose(m.spectral, 1.0)
        assert np.isclose(m.max_abs, 1.0)

    def test_zero(self):
        m = norms(np.zeros((3, 3)))
        assert m.frobenius == m.spectral == m.max_abs == 0.0

    def test_single_column(self):
        m = norms(np.array([[3.0, 0.0], [4.0, 0.0]]))
        assert np.isclose(m.frobenius, 5.0)
        assert np.isclose(m.spectral, 5.0)
        assert np.isclose(m.max_abs, 4.0)


def test_numerical_rank():
    assert numerical_rank(np.array([3.0, 1.0, 0.0]), (5, 5)) == 2
    assert numerical_rank(np.array([1.0, 1e-16]), (100, 100)) == 1
    assert numerical_rank(np.zeros(3), (4, 4)) == 0
