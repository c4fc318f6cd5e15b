"""Dense matrix container and the numerical primitives used by the solver.

Thin SVD, singular value shrinkage / thresholding and the three matrix
norms the solver needs (Frobenius, spectral, element-wise max).
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError, InvalidParameterError


@dataclass
class FrameMatrix:
    """A sequence of vectorized frames, one frame per column.

    Parameters
    ----------
    data : ndarray, shape (p, n)
        Pixel intensities; column ``i`` is frame ``i`` flattened row-major.
    height, width : int
        Frame geometry; ``p == height * width``.
    """

    data: np.ndarray
    height: int
    width: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[1] < 1:
            raise InvalidInputError(
                f"frame matrix must be 2-D with at least one column, got shape "
                f"{self.data.shape}"
            )
        if self.height < 1 or self.width < 1:
            raise InvalidInputError("frame geometry must be positive")
        if self.data.shape[0] != self.height * self.width:
            raise InvalidInputError(
                f"row count {self.data.shape[0]} != height*width = "
                f"{self.height * self.width}"
            )
        if not np.all(np.isfinite(self.data)):
            raise InvalidInputError("frame matrix contains non-finite entries")

    @property
    def n_pixels(self):
        return self.data.shape[0]

    @property
    def n_frames(self):
        return self.data.shape[1]

    def frame(self, i):
        """Frame ``i`` as a (height, width) view."""
        return self.data[:, i].reshape(self.height, self.width)

    @classmethod
    def from_frames(cls, frames):
        """Stack 2-D frames (all same shape) into a FrameMatrix."""
        frames = [np.asarray(f, dtype=np.float64) for f in frames]
        if not frames:
            raise InvalidInputError("empty frame list")
        h, w = frames[0].shape
        cols = []
        for i, f in enumerate(frames):
            if f.shape != (h, w):
                raise InvalidInputError(
                    f"frame {i} has shape {f.shape}, expected {(h, w)}"
                )
            cols.append(f.ravel())
        return cls(np.stack(cols, axis=1), h, w)


@dataclass
class SvdFactors:
    """Thin SVD ``M = U @ diag(sigma) @ V.T`` with k = min(p, n)."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def reconstruct(self):
        return (self.U * self.sigma) @ self.V.T


class MatrixNorms(NamedTuple):
    frobenius: float
    spectral: float
    max_abs: float


def _check_finite_matrix(M):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.size == 0:
        raise InvalidInputError(f"expected a nonempty 2-D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix contains non-finite entries")
    return M


def thin_svd(M):
    """Thin singular value decomposition of a dense matrix.

    Returns
    -------
    SvdFactors
        ``U`` (p, k), ``sigma`` (k,) nonincreasing and nonnegative,
        ``V`` (n, k), with k = min(p, n).
    """
    M = _check_finite_matrix(M)
    U, sigma, Vt = np.linalg.svd(M, full_matrices=False)
    return SvdFactors(U=U, sigma=sigma, V=Vt.T)


def shrink_singular_values(sigma, threshold):
    """Soft-threshold a nonnegative spectrum: ``max(sigma - threshold, 0)``."""
    if threshold <= 0:
        raise InvalidParameterError(f"threshold must be positive, got {threshold}")
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma < 0):
        raise InvalidInputError("singular values must be nonnegative")
    return np.maximum(sigma - threshold, 0.0)


def svt_factors(G, threshold):
    """Singular value thresholding, returning the result and the shrunk spectrum.

    Solves ``argmin_B threshold*||B||_* + 0.5*||G - B||_F^2``.
    """
    factors = thin_svd(G)
    shrunk = shrink_singular_values(factors.sigma, threshold)
    B = (factors.U * shrunk) @ factors.V.T
    return B, shrunk


def svt(G, threshold):
    """Singular value thresholding.

    Returns
    -------
    (B, rank)
        The thresholded matrix and the number of strictly positive
        singular values that survive the shrinkage.
    """
    B, shrunk = svt_factors(G, threshold)
    return B, int(np.count_nonzero(shrunk > 0))


def numerical_rank(sigma, shape):
    """Numerical rank of a spectrum: count sigma > max(shape)*sigma_max*1e-12."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.size == 0:
        return 0
    tol = max(shape) * sigma.max() * 1e-12
    return int(np.count_nonzero(sigma > tol))


def norms(M):
    """Frobenius, spectral and element-wise max-abs norms of a matrix."""
    M = _check_finite_matrix(M)
    return MatrixNorms(
        frobenius=float(np.linalg.norm(M, "fro")),
        spectral=float(np.linalg.norm(M, 2)),
        max_abs=float(np.max(np.abs(M))),
    )
