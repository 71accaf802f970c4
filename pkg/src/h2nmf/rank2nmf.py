"""Rank-two NMF tailored for spectra-as-columns data.

Pipeline: project onto the leading two-dimensional singular subspace, pick
two extreme columns with successive projection, clamp them to the
nonnegative orthant, then fit per-column weights with two-variable NNLS.
Exact on rank-two matrices with unit column sums, and on two-endmember
mixtures with pure pixels and column sums at most one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import leading_sigma_sq, nnls_columns, spa, svd2

__all__ = [
    "Rank2Factors",
    "Rank2NonnegReport",
    "DegenerateFactorsError",
    "rank2_nmf",
    "check_nonneg_rank2_condition",
]


class DegenerateFactorsError(ValueError):
    """Both selected columns clamped to zero vectors."""


@dataclass(frozen=True)
class Rank2Factors:
    """Nonnegative factor pair W (m x 2), H (2 x n) with W ~ two data columns.

    ``selected_indices`` are the two distinct input columns chosen by
    successive projection on the rank-two coordinates; ``residual_fro`` is
    ||M - W H||_F.
    """

    W: np.ndarray
    H: np.ndarray
    selected_indices: tuple[int, int]
    residual_fro: float


def _most_orthogonal(X: np.ndarray, i: int) -> tuple[int, float]:
    """Column of X (2 x n) most orthogonal to column i, with its score."""
    xi = X[:, i]
    ni = np.linalg.norm(xi)
    cross = np.abs(xi[0] * X[1] - xi[1] * X[0])
    norms = np.linalg.norm(X, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        score = np.where(norms > 0, cross / (ni * norms), -1.0)
    score[i] = -1.0
    k = int(np.argmax(score))
    return k, float(score[k])


def rank2_nmf(M, seed: int = 0) -> Rank2Factors:
    """Rank-two NMF of a nonnegative matrix.

    If M has rank two and unit column sums the factorization is exact
    (residual at the level of the iteration tolerance).  Homogeneous in M:
    scaling the input scales W and the residual, with the same selected
    indices.
    """
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] < 2:
        raise ValueError("rank2_nmf needs a matrix with at least 2 columns")
    dec = svd2(A, seed=seed)
    X = np.vstack([dec.sigma1 * dec.v1, dec.sigma2 * dec.v2])
    sel = spa(X, 2)
    i, j = int(sel[0]), int(sel[1])

    # parallel selected columns: fall back to the most orthogonal partner
    xi, xj = X[:, i], X[:, j]
    cross = abs(xi[0] * xj[1] - xi[1] * xj[0])
    if cross <= 1e-12 * np.linalg.norm(xi) * np.linalg.norm(xj):
        cand, score = _most_orthogonal(X, i)
        if cand != i and score > 0.0:
            j = cand

    cols = [i, j]
    W = np.maximum(
        0.0,
        np.outer(dec.u1, dec.sigma1 * dec.v1[cols])
        + np.outer(dec.u2, dec.sigma2 * dec.v2[cols]),
    )
    if not W[:, 0].any() and not W[:, 1].any():
        raise DegenerateFactorsError("degenerate factors")
    H = nnls_columns(W, A)
    residual = float(np.linalg.norm(A - W @ H))
    return Rank2Factors(W=W, H=H, selected_indices=(i, j), residual_fro=residual)


@dataclass(frozen=True)
class Rank2NonnegReport:
    """Diagnostic for when the best rank-two approximation stays nonnegative.

    ``condition_holds`` is the sufficient test min(M) >= sigma3(M); when it
    holds every entry of the optimal rank-two approximation is nonnegative.
    ``fraction_nonneg`` counts entries of the computed approximation above
    -1e-10 (tiny negatives at iteration-tolerance level count as zero).
    """

    min_entry: float
    sigma3_bound: float
    condition_holds: bool
    fraction_nonneg: float


def check_nonneg_rank2_condition(M, seed: int = 0) -> Rank2NonnegReport:
    """Evaluate the nonnegativity condition for the rank-two approximation.

    sigma3 is estimated as the spectral norm of the residual after removing
    the leading two singular triplets (power iteration on the residual);
    for matrices with min(m, n) < 3 it is zero by convention.
    """
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    dec = svd2(A, seed=seed)
    approx = dec.approx()
    if min(A.shape) < 3:
        sigma3 = 0.0
    else:
        resid = A - approx
        sigma3 = float(np.sqrt(leading_sigma_sq(resid, seed=seed)))
    min_entry = float(A.min())
    fraction = float(np.mean(approx >= -1e-10))
    return Rank2NonnegReport(
        min_entry=min_entry,
        sigma3_bound=sigma3,
        condition_holds=min_entry >= sigma3,
        fraction_nonneg=fraction,
    )
