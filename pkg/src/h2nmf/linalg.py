"""Dense rank-1/rank-2 numerical kernels.

Leading singular values by power iteration, a truncated rank-two SVD by
subspace iteration, successive-projection column selection, and the
two-variable nonnegative least squares used to fit per-pixel weights.

All routines are deterministic: iterative methods start from a seeded
generator and ties break toward the smallest column index.  The singular
kernels run on the smaller Gram matrix (``M M^T`` when ``m <= n``, ``M^T M``
otherwise), which costs one matrix product but squares the condition number
of the eigenproblem; for reflectance-scale data this is the usual
speed/stability trade and the 1e-10 relative tolerance leaves ample slack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels

POWER_TOL = 1e-10
POWER_MAXITER = 1000

__all__ = [
    "Svd2",
    "leading_sigma_sq",
    "leading_triplet",
    "svd2",
    "spa",
    "nnls2",
    "nnls_columns",
]


def _as_matrix(M) -> np.ndarray:
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    return A


def _unit_orthogonal(v: np.ndarray) -> np.ndarray:
    """Deterministic unit vector orthogonal to ``v`` (dimension >= 2)."""
    k = v.shape[0]
    if k < 2:
        # No orthogonal direction exists in R^1; degenerate by construction.
        return np.ones(1)
    e = np.zeros(k)
    e[int(np.argmin(np.abs(v)))] = 1.0
    w = e - (e @ v) * v
    nw = np.linalg.norm(w)
    if nw == 0.0:
        e[:] = 0.0
        e[(int(np.argmin(np.abs(v))) + 1) % k] = 1.0
        w = e - (e @ v) * v
        nw = np.linalg.norm(w)
    return w / nw


def _power_iteration(G: np.ndarray, rng: np.random.Generator):
    """Leading eigenpair of a PSD matrix.

    Returns ``(eigenvalue, eigenvector, iterations, converged)``.  Stops on a
    relative change of the Rayleigh quotient below POWER_TOL, or after
    POWER_MAXITER iterations (best iterate returned, converged=False).
    """
    k = G.shape[0]
    v = rng.standard_normal(k)
    v /= np.linalg.norm(v)
    lam = 0.0
    lam_prev = None
    converged = False
    it = 0
    for it in range(1, POWER_MAXITER + 1):
        w = G @ v
        lam = float(v @ w)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            # started in the null space; draw a fresh direction
            v = rng.standard_normal(k)
            v /= np.linalg.norm(v)
            lam_prev = None
            continue
        v = w / nw
        if lam_prev is not None and it >= 3:
            if abs(lam - lam_prev) <= POWER_TOL * max(abs(lam), 1e-300):
                converged = True
                break
        lam_prev = lam
    return max(lam, 0.0), v, it, converged


def leading_sigma_sq(M, seed: int = 0) -> float:
    """Squared leading singular value of ``M``.

    Power iteration on the smaller Gram matrix, relative tolerance 1e-10,
    at most 1000 iterations.  A single column gives its squared Euclidean
    norm; an empty column set is a domain error.
    """
    A = _as_matrix(M)
    m, n = A.shape
    if n == 0 or m == 0:
        raise ValueError("empty cluster")
    G = A @ A.T if m <= n else A.T @ A
    if not G.any():
        return 0.0
    lam, _, _, _ = _power_iteration(G, np.random.default_rng(seed))
    return lam


def leading_triplet(M, seed: int = 0):
    """Leading singular triplet ``(u, sigma, v)`` with unit u, v.

    Signs follow the power iterate; callers that need a nonnegative pair
    fix the sign themselves.
    """
    A = _as_matrix(M)
    m, n = A.shape
    if n == 0 or m == 0:
        raise ValueError("empty cluster")
    left = m <= n
    G = A @ A.T if left else A.T @ A
    if not G.any():
        return np.zeros(m), 0.0, np.zeros(n)
    _, q, _, _ = _power_iteration(G, np.random.default_rng(seed))
    if left:
        u = q
        w = A.T @ u
    else:
        v = q
        w = A @ v
    sigma = float(np.linalg.norm(w))
    if sigma == 0.0:
        other = np.zeros(n if left else m)
    else:
        other = w / sigma
    if left:
        return u, sigma, other
    return other, sigma, q


@dataclass(frozen=True)
class Svd2:
    """Two leading singular triplets of a matrix.

    ``sigma1 >= sigma2 >= 0``; u1,u2 and v1,v2 are orthonormal pairs.  When
    the matrix has rank < 2 the second pair is an arbitrary orthonormal
    completion.  ``converged`` reports whether subspace iteration hit the
    relative tolerance before the iteration cap.
    """

    u1: np.ndarray
    u2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    sigma1: float
    sigma2: float
    converged: bool
    iterations: int

    def approx(self) -> np.ndarray:
        """Rank-two reconstruction sigma1*u1 v1^T + sigma2*u2 v2^T."""
        return self.sigma1 * np.outer(self.u1, self.v1) + self.sigma2 * np.outer(
            self.u2, self.v2
        )


def _zero_svd2(m: int, n: int) -> Svd2:
    u1 = np.zeros(m)
    u1[0] = 1.0
    u2 = np.zeros(m)
    u2[min(1, m - 1)] = 1.0
    if m == 1:
        u2 = u1.copy()
    v1 = np.zeros(n)
    v1[0] = 1.0
    v2 = np.zeros(n)
    v2[1] = 1.0
    return Svd2(u1, u2, v1, v2, 0.0, 0.0, True, 0)


def svd2(M, seed: int = 0) -> Svd2:
    """Two leading singular triplets by subspace iteration on the Gram side.

    An all-zero matrix yields sigma1 = sigma2 = 0 with canonical orthonormal
    vectors (documented, not an error).  Rank-one input yields sigma2 = 0
    and an arbitrary orthonormal second pair.
    """
    A = _as_matrix(M)
    m, n = A.shape
    if m < 1 or n < 2:
        raise ValueError("svd2 needs at least 1 row and 2 columns")
    if not A.any():
        return _zero_svd2(m, n)
    left = m <= n
    G = A @ A.T if left else A.T @ A
    k = G.shape[0]

    if k == 1:
        # one-row matrix: rank <= 1, handle directly
        sigma1 = float(np.linalg.norm(A))
        u1 = np.ones(1)
        v1 = A[0] / sigma1
        v2 = _unit_orthogonal(v1)
        return Svd2(u1, u1.copy(), v1, v2, sigma1, 0.0, True, 0)

    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((k, 2)))
    lam_prev = None
    converged = False
    it = 0
    for it in range(1, POWER_MAXITER + 1):
        Z = G @ Q
        B = Q.T @ Z
        lam = np.sort(np.linalg.eigvalsh(B))[::-1]
        Q, _ = np.linalg.qr(Z)
        if lam_prev is not None and it >= 3:
            if np.max(np.abs(lam - lam_prev)) <= POWER_TOL * max(lam[0], 1e-300):
                converged = True
                break
        lam_prev = lam

    # Ritz step: rotate Q onto the eigenvectors of the projected block
    B = Q.T @ (G @ Q)
    w, P = np.linalg.eigh(B)
    order = np.argsort(w)[::-1]
    Q = Q @ P[:, order]

    scale = float(np.linalg.norm(A))
    sides = []
    sigmas = []
    for i in range(2):
        q = Q[:, i]
        w_other = A.T @ q if left else A @ q
        s = float(np.linalg.norm(w_other))
        if s <= scale * 1e-14:
            sigmas.append(0.0)
            sides.append(None)
        else:
            sigmas.append(s)
            sides.append(w_other / s)
    if sigmas[1] > sigmas[0]:
        sigmas.reverse()
        sides.reverse()
        Q = Q[:, ::-1]

    if sides[0] is None:
        # G was nonzero, so this cannot happen; guard for completeness
        return _zero_svd2(m, n)
    if sides[1] is None:
        sides[1] = _unit_orthogonal(sides[0])

    if left:
        u1, u2 = Q[:, 0], Q[:, 1]
        v1, v2 = sides
    else:
        v1, v2 = Q[:, 0], Q[:, 1]
        u1, u2 = sides
    return Svd2(u1, u2, v1, v2, sigmas[0], sigmas[1], converged, it)


def spa(X, r: int) -> np.ndarray:
    """Successive projection: greedy max-norm column selection.

    Repeatedly selects the column of the residual with the largest Euclidean
    norm (ties to the smallest index), then projects the residual onto the
    orthogonal complement of the selected column.  Returns ``r`` distinct
    indices in extraction order.  On a noiseless separable matrix
    ``X = W [I_r, H'] Pi`` with the column sums of H' at most one and W full
    column rank, the selected indices locate the columns of W exactly.
    """
    A = np.ascontiguousarray(_as_matrix(X))
    if r < 1:
        raise ValueError("r must be at least 1")
    if r > A.shape[1]:
        raise ValueError("r exceeds column count")
    return np.asarray(kernels.spa_select(A, r), dtype=np.int64)


def nnls_columns(W, M) -> np.ndarray:
    """Column-wise two-variable NNLS: H[:, i] = argmin_{x>=0} ||W x - M[:, i]||.

    Decouples into n independent two-variable problems; total cost O(mn).
    Zero columns of W pin the corresponding coefficient to zero.
    """
    A = _as_matrix(W)
    B = _as_matrix(M)
    if A.shape[1] != 2:
        raise ValueError("W must have exactly 2 columns")
    if A.shape[0] != B.shape[0]:
        raise ValueError("row mismatch between W and M")
    q11 = float(A[:, 0] @ A[:, 0])
    q12 = float(A[:, 0] @ A[:, 1])
    q22 = float(A[:, 1] @ A[:, 1])
    C = np.ascontiguousarray(A.T @ B)
    return np.asarray(kernels.resolve_nnls2(q11, q12, q22, C))


def nnls2(A, b) -> np.ndarray:
    """argmin_{x >= 0} ||A x - b||_2 for an m x 2 matrix A.

    Solves the unconstrained 2 x 2 normal equations; if the solution is
    nonnegative it is returned, otherwise the better of the two
    single-active-set candidates wins (ties toward the candidate that zeroes
    the first coefficient).
    """
    v = np.asarray(b, dtype=np.float64).reshape(-1)
    return nnls_columns(A, v[:, None])[:, 0]
