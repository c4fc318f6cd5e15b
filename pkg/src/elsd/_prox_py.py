"""Pure-numpy kernel for the overlapping-group dual prox sweeps.

Fallback used when the compiled extension (elsd._prox) is unavailable.
Implements the identical cyclic block-coordinate ascent: groups are
processed in the canonical color-major order; groups sharing a color are
pairwise disjoint, so each color class is updated as one vectorized batch
(mathematically identical to processing its groups one by one).

Array layout shared with the compiled kernel:

- ``h_ext``, ``r_ext``: length p+1, the last slot is a scratch cell that is
  always zero and is the target of the padding index p.
- ``xi``: (n_groups, max_size) dual variables, pad entries stay zero.
- ``idx``: (n_groups, max_size) indices into the extended vectors, padded
  with p.
- ``radii``: per-group l1-ball radius (lambda' * group weight), all > 0.
"""

import numpy as np


def _project_rows_l1(V, radii):
    """Project each row of V onto the signed l1 ball of its radius.

    Rows already inside their ball are returned unchanged. Pad entries
    (zeros) stay zero under soft-thresholding.
    """
    A = np.abs(V)
    over = A.sum(axis=1) > radii
    if not np.any(over):
        return V
    out = V.copy()
    Av = A[over]
    S = -np.sort(-Av, axis=1)
    cs = np.cumsum(S, axis=1)
    k = np.arange(1, V.shape[1] + 1, dtype=np.float64)
    rad = radii[over]
    rho = np.sum(S > (cs - rad[:, None]) / k, axis=1)
    theta = (cs[np.arange(len(rho)), rho - 1] - rad) / rho
    out[over] = np.sign(V[over]) * np.maximum(Av - theta[:, None], 0.0)
    return out


def run_prox(h_ext, r_ext, xi, idx, sizes, radii, color_groups, tol, max_sweeps):
    """Sweep until the duality-gap certificate holds.

    Returns (gap, sweeps, converged); mutates ``r_ext`` (which becomes the
    prox result on its first p entries) and ``xi`` in place.
    """
    p = h_ext.shape[0] - 1
    h = h_ext[:p]
    half_h_sq = 0.5 * float(h @ h)
    gap = np.inf
    for sweep in range(1, max_sweeps + 1):
        max_change = 0.0
        for rows in color_groups:
            I = idx[rows]
            V = r_ext[I] + xi[rows]
            new_xi = _project_rows_l1(V, radii[rows])
            change = np.max(np.abs(new_xi - xi[rows])) if rows.size else 0.0
            if change > max_change:
                max_change = change
            r_ext[I] = V - new_xi
            xi[rows] = new_xi
        s = r_ext[:p]
        group_max = np.max(np.abs(r_ext)[idx], axis=1)
        diff = h - s
        primal = 0.5 * float(diff @ diff) + float(radii @ group_max)
        dual = half_h_sq - 0.5 * float(s @ s)
        gap = primal - dual
        if max_change <= tol and gap <= tol * (1.0 + abs(primal)):
            return gap, sweep, True
    return gap, max_sweeps, False
