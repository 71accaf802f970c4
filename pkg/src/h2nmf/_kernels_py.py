"""Pure-NumPy fallback for the per-pixel inner loops.

``h2nmf._kernels`` (Cython) implements the same two entry points with
identical branch logic; ``h2nmf._backend`` picks whichever is importable.
Keep the two modules in lockstep.
"""

import numpy as np


def resolve_nnls2(q11, q12, q22, C):
    """Per-column two-variable NNLS given the normal-equation pieces.

    ``q11, q12, q22`` are the entries of Q = W^T W and ``C`` is the 2 x n
    matrix W^T B for right-hand sides B.  Returns the 2 x n nonnegative
    coefficient matrix.  A zero column of W pins its coefficient to zero;
    ties between the two single-active-set candidates go to the one that
    zeroes the first coefficient.
    """
    c1 = C[0]
    c2 = C[1]
    n = C.shape[1]
    out = np.zeros((2, n))
    det = q11 * q22 - q12 * q12
    regular = det > 1e-13 * q11 * q22 and det > 0.0
    if regular:
        x1 = (q22 * c1 - q12 * c2) / det
        x2 = (q11 * c2 - q12 * c1) / det
        interior = (x1 >= 0.0) & (x2 >= 0.0)
        out[0, interior] = x1[interior]
        out[1, interior] = x2[interior]
        todo = ~interior
    else:
        todo = np.ones(n, dtype=bool)
    if np.any(todo):
        tc1 = c1[todo]
        tc2 = c2[todo]
        y2 = np.maximum(0.0, tc2 / q22) if q22 > 0.0 else np.zeros(tc2.shape)
        z1 = np.maximum(0.0, tc1 / q11) if q11 > 0.0 else np.zeros(tc1.shape)
        fy = y2 * (q22 * y2 - 2.0 * tc2)
        fz = z1 * (q11 * z1 - 2.0 * tc1)
        pick_y = fy <= fz
        col = np.flatnonzero(todo)
        out[1, col[pick_y]] = y2[pick_y]
        out[0, col[~pick_y]] = z1[~pick_y]
    return out


def spa_select(X, r):
    """Greedy max-norm column selection with orthogonal-complement updates.

    Returns ``r`` distinct column indices in extraction order.  Ties break
    toward the smallest index; already-selected columns never repeat.
    """
    R = np.array(X, dtype=np.float64, copy=True)
    n = R.shape[1]
    norms = np.einsum("ij,ij->j", R, R)
    chosen = np.zeros(n, dtype=bool)
    sel = np.empty(r, dtype=np.int64)
    for i in range(r):
        avail = np.flatnonzero(~chosen)
        k = int(avail[np.argmax(norms[avail])])
        sel[i] = k
        chosen[k] = True
        nk = norms[k]
        if nk > 0.0:
            u = R[:, k] / np.sqrt(nk)
            R -= np.outer(u, u @ R)
            norms = np.einsum("ij,ij->j", R, R)
    return sel
