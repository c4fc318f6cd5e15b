"""Spatial group construction and the l1/l-inf structured sparsity norm.

The norm of a vectorized frame is ``sum_g w_g * max_{j in g} |s_j|`` over a
set of (typically overlapping) pixel groups. Its proximal operator is
solved exactly through the dual: minimize ``0.5*||h - sum_g xi_g||^2``
subject to ``||xi_g||_1 <= lambda' * w_g`` and ``supp(xi_g) <= g``, by
cyclic block-coordinate ascent where each block update is an exact l1-ball
projection. The result is recovered as ``s = h - sum_g xi_g`` and certified
by the primal-dual gap.

The sweep kernel has two interchangeable implementations: a compiled
extension (elsd._prox) and a pure-numpy fallback (elsd._prox_py), selected
at import time. Set ``ELSD_PROX_BACKEND=python`` or ``=compiled`` to force
one.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from . import _prox_py
from .errors import (
    GeometryError,
    InvalidInputError,
    InvalidParameterError,
    ProxStalledError,
)

try:
    from . import _prox as _prox_c
except ImportError:
    _prox_c = None

_requested = os.environ.get("ELSD_PROX_BACKEND", "").strip().lower()
if _requested == "compiled" and _prox_c is None:
    raise ImportError(
        "ELSD_PROX_BACKEND=compiled but the elsd._prox extension is not built"
    )
if _requested == "python" or _prox_c is None:
    PROX_BACKEND = "python"
else:
    PROX_BACKEND = "compiled"

DEFAULT_PROX_TOL = 1e-9
DEFAULT_MAX_SWEEPS = 20000


@dataclass
class GroupSet:
    """Pixel-index groups over a frame geometry, with per-group weights.

    ``groups[i]`` holds indices into the vectorized (row-major) frame.
    Construction precomputes the padded index table and a coloring of the
    group-overlap graph; the canonical sweep order of the prox is
    color-major, so same-color (disjoint) groups can be updated as one
    vectorized batch without changing the sequential semantics.
    """

    groups: list
    weights: np.ndarray
    height: int
    width: int
    window: int | None = None
    # derived, filled in __post_init__
    idx: np.ndarray = field(init=False, repr=False)
    sizes: np.ndarray = field(init=False, repr=False)
    colors: np.ndarray = field(init=False, repr=False)
    order: np.ndarray = field(init=False, repr=False)
    color_groups: list = field(init=False, repr=False)

    def __post_init__(self):
        p = self.height * self.width
        if p < 1:
            raise GeometryError("frame geometry must be positive")
        if not self.groups:
            raise InvalidInputError("group set must contain at least one group")
        self.groups = [np.asarray(g, dtype=np.int64) for g in self.groups]
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (len(self.groups),):
            raise InvalidInputError("one weight per group required")
        if np.any(self.weights <= 0):
            raise InvalidInputError("group weights must be positive")
        for i, g in enumerate(self.groups):
            if g.size == 0:
                raise InvalidInputError(f"group {i} is empty")
            if g.min() < 0 or g.max() >= p:
                raise InvalidInputError(f"group {i} has indices outside [0, {p})")
            if np.unique(g).size != g.size:
                raise InvalidInputError(f"group {i} has duplicate indices")

        n_groups = len(self.groups)
        max_size = max(g.size for g in self.groups)
        self.idx = np.full((n_groups, max_size), p, dtype=np.int64)
        self.sizes = np.empty(n_groups, dtype=np.int32)
        for i, g in enumerate(self.groups):
            self.idx[i, : g.size] = g
            self.sizes[i] = g.size

        self.colors = self._greedy_coloring(p)
        order = np.lexsort((np.arange(n_groups), self.colors))
        self.order = order.astype(np.int32)
        self.color_groups = [
            order[self.colors[order] == c].astype(np.intp)
            for c in range(self.colors.max() + 1)
        ]

    def _greedy_coloring(self, p):
        """Color the group-overlap graph so same-color groups are disjoint."""
        pixel_owner = [[] for _ in range(p)]
        colors = np.full(len(self.groups), -1, dtype=np.int64)
        for i, g in enumerate(self.groups):
            used = set()
            for j in g:
                for other in pixel_owner[j]:
                    used.add(colors[other])
            c = 0
            while c in used:
                c += 1
            colors[i] = c
            for j in g:
                pixel_owner[j].append(i)
        return colors

    @property
    def n_pixels(self):
        return self.height * self.width

    @property
    def n_groups(self):
        return len(self.groups)

    def membership_counts(self):
        """How many groups each pixel belongs to."""
        counts = np.zeros(self.n_pixels, dtype=np.int64)
        for g in self.groups:
            counts[g] += 1
        return counts


def build_grid_groups(height, width, window=3):
    """Sliding-window groups: one per fully contained window position.

    Positions advance with stride 1 in row-major order; all weights are 1.
    ``window=1`` degenerates to singleton groups (the norm becomes plain l1).
    """
    if window < 1:
        raise InvalidParameterError(f"window must be >= 1, got {window}")
    if height < window or width < window:
        raise GeometryError(
            f"frame {height}x{width} is smaller than the {window}x{window} window"
        )
    groups = []
    cols = np.arange(window, dtype=np.int64)
    for r in range(height - window + 1):
        for c in range(width - window + 1):
            rows = (np.arange(window, dtype=np.int64) + r) * width
            groups.append((rows[:, None] + cols[None, :] + c).ravel())
    weights = np.ones(len(groups))
    return GroupSet(groups, weights, height, width, window=window)


@dataclass
class DualFlowState:
    """Certified dual solution of one prox call.

    ``xi[i]`` holds the dual variables of group i (aligned with
    ``gs.groups[i]``); ``residual`` is ``h - sum_g xi_g``, i.e. the prox
    result itself; ``gap`` is the primal-dual objective gap at return.
    """

    xi: list
    residual: np.ndarray
    gap: float
    sweeps: int


def _check_vector(s, gs):
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (gs.n_pixels,):
        raise InvalidInputError(
            f"vector length {s.shape} does not match geometry "
            f"{gs.height}x{gs.width} (p={gs.n_pixels})"
        )
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("vector contains non-finite entries")
    return s


def structured_norm(s, gs):
    """Weighted sum over groups of the max absolute entry within the group."""
    s = _check_vector(s, gs)
    ext = np.empty(gs.n_pixels + 1)
    ext[:-1] = np.abs(s)
    ext[-1] = 0.0
    return float(gs.weights @ np.max(ext[gs.idx], axis=1))


def structured_norm_batch(S, gs):
    """Per-column structured norms of a (p, n) matrix."""
    S = np.asarray(S, dtype=np.float64)
    ext = np.zeros((gs.n_pixels + 1, S.shape[1]))
    ext[:-1] = np.abs(S)
    return gs.weights @ np.max(ext[gs.idx], axis=1)


def _run_kernel(h, lam, gs, tol, max_sweeps):
    p = gs.n_pixels
    h_ext = np.zeros(p + 1)
    h_ext[:p] = h
    r_ext = h_ext.copy()
    xi = np.zeros((gs.n_groups, gs.idx.shape[1]))
    radii = lam * gs.weights
    if PROX_BACKEND == "compiled":
        gap, sweeps, converged = _prox_c.run_prox(
            h_ext, r_ext, xi, gs.idx, gs.sizes, radii, gs.order, tol, max_sweeps
        )
    else:
        gap, sweeps, converged = _prox_py.run_prox(
            h_ext, r_ext, xi, gs.idx, gs.sizes, radii, gs.color_groups,
            tol, max_sweeps,
        )
    return r_ext[:p], xi, gap, sweeps, converged


def prox_structured(h, lambda_prime, gs, tol=DEFAULT_PROX_TOL,
                    max_sweeps=DEFAULT_MAX_SWEEPS):
    """Exact prox of ``lambda' * sum_g w_g ||s_g||_inf`` at h.

    Returns ``(s, state)`` where the duality gap in ``state`` certifies
    ``gap <= tol * (1 + |primal objective|)``. ``lambda_prime == 0`` is the
    identity map (no shrinkage).

    Raises
    ------
    ProxStalledError
        If the certificate is not reached within ``max_sweeps`` sweeps.
    """
    h = _check_vector(h, gs)
    if lambda_prime < 0:
        raise InvalidParameterError(f"lambda' must be >= 0, got {lambda_prime}")
    if tol <= 0:
        raise InvalidParameterError(f"tol must be positive, got {tol}")
    if lambda_prime == 0:
        xi = [np.zeros(g.size) for g in gs.groups]
        return h.copy(), DualFlowState(xi=xi, residual=h.copy(), gap=0.0, sweeps=0)
    s, xi, gap, sweeps, converged = _run_kernel(h, lambda_prime, gs, tol, max_sweeps)
    if not converged:
        raise ProxStalledError(
            f"prox did not certify optimality in {max_sweeps} sweeps "
            f"(last gap {gap:.3e})",
            gap=gap,
        )
    xi_list = [xi[i, : gs.sizes[i]].copy() for i in range(gs.n_groups)]
    return s.copy(), DualFlowState(xi=xi_list, residual=s.copy(), gap=gap,
                                   sweeps=sweeps)


def prox_batch(H, lambda_prime, gs, tol=DEFAULT_PROX_TOL,
               max_sweeps=DEFAULT_MAX_SWEEPS):
    """Column-wise prox of a (p, n) matrix; columns are independent."""
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != gs.n_pixels:
        raise InvalidInputError(
            f"matrix shape {H.shape} does not match geometry (p={gs.n_pixels})"
        )
    if not np.all(np.isfinite(H)):
        raise InvalidInputError("matrix contains non-finite entries")
    if lambda_prime < 0:
        raise InvalidParameterError(f"lambda' must be >= 0, got {lambda_prime}")
    if lambda_prime == 0:
        return H.copy()
    S = np.empty_like(H)
    stalled = []
    for i in range(H.shape[1]):
        s, _, gap, _, converged = _run_kernel(H[:, i], lambda_prime, gs, tol,
                                              max_sweeps)
        if not converged:
            stalled.append((i, gap))
        S[:, i] = s
    if stalled:
        frames = [i for i, _ in stalled]
        worst = max(g for _, g in stalled)
        raise ProxStalledError(
            f"prox stalled on frames {frames} (worst gap {worst:.3e})",
            gap=worst,
            frames=frames,
        )
    return S
