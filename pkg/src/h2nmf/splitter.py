"""Cluster splitting.

The main splitter factors a cluster with rank-two NMF, reduces each column
to the statistic x = H(1,:)/(H(1,:)+H(2,:)), and thresholds x at the value
minimizing an objective that trades cluster balance against boundary
stability.  Baseline splitters run two-cluster Lloyd iterations (Euclidean
or cosine) from the same SPA-on-rank-2-SVD initialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import spa, svd2
from .rank2nmf import DegenerateFactorsError, rank2_nmf

__all__ = [
    "SplitResult",
    "UnsplittableClusterError",
    "x_statistic",
    "empirical_cdf",
    "window_density",
    "split_objective",
    "split_objective_alt",
    "choose_delta",
    "split_rank2",
    "split_kmeans",
    "flat_kmeans",
]

DEFAULT_DELTA_HAT = 0.05


class UnsplittableClusterError(ValueError):
    """All column statistics coincide; no threshold separates the cluster."""


@dataclass
class SplitResult:
    """Two-way partition of a cluster's column indices.

    For the rank-two splitter, membership follows the threshold rule
    ``i in k1 iff x_i >= delta_star``.  ``score`` is the split gain
    sigma1^2(k1) + sigma1^2(k2) - sigma1^2(k); the hierarchy fills it in.
    """

    k1: np.ndarray
    k2: np.ndarray
    delta_star: float
    x: np.ndarray
    method: str
    score: float | None = None


def x_statistic(H) -> np.ndarray:
    """Per-column share of the first factor, in [0, 1].

    Zero columns (both weights zero) map to 0.5 by convention, which keeps
    background pixels away from both extremes.
    """
    A = np.asarray(H, dtype=np.float64)
    s = A[0] + A[1]
    with np.errstate(invalid="ignore", divide="ignore"):
        x = np.where(s > 0, A[0] / s, 0.5)
    return x


def empirical_cdf(x, delta: float) -> float:
    """Fraction of entries at or below ``delta``."""
    v = np.asarray(x, dtype=np.float64)
    if v.size == 0:
        raise ValueError("empty statistic vector")
    return float(np.count_nonzero(v <= delta)) / v.size


def window_density(x, delta: float, delta_hat: float = DEFAULT_DELTA_HAT) -> float:
    """Normalized count of entries within ``delta_hat`` of ``delta``.

    The window is clipped to [0, 1] and the count is normalized by the
    clipped width, so for uniformly distributed x the expected value is one.
    """
    if not 0.0 < delta_hat < 0.5:
        raise ValueError("delta_hat must lie in (0, 0.5)")
    v = np.asarray(x, dtype=np.float64)
    if v.size == 0:
        raise ValueError("empty statistic vector")
    lo = max(0.0, delta - delta_hat)
    hi = min(1.0, delta + delta_hat)
    count = int(np.count_nonzero((v >= lo) & (v <= hi)))
    return count / (v.size * (hi - lo))


def split_objective(x, delta: float, delta_hat: float = DEFAULT_DELTA_HAT) -> float:
    """Threshold objective: -log(F(1-F)) + exp(G).

    The first term rejects skewed partitions and diverges as F approaches
    0 or 1, so no empty side can minimize it; the second penalizes
    thresholds placed inside a dense region.  Infinite values are legal
    returns, not errors.
    """
    f = empirical_cdf(x, delta)
    if f <= 0.0 or f >= 1.0:
        return float("inf")
    g = window_density(x, delta, delta_hat)
    return float(-np.log(f * (1.0 - f)) + np.exp(g))


def split_objective_alt(x, delta: float, delta_hat: float = DEFAULT_DELTA_HAT) -> float:
    """Quadratic variant: 4(F - 1/2)^2 + G^2.

    Stays finite at empty partitions, so callers must restrict candidates
    to thresholds with points on both sides.
    """
    f = empirical_cdf(x, delta)
    g = window_density(x, delta, delta_hat)
    return float(4.0 * (f - 0.5) ** 2 + g * g)


def _candidate_grid(xs: np.ndarray) -> np.ndarray:
    """Threshold candidates: midpoints of consecutive distinct values plus a
    uniform 201-point grid, endpoints excluded so both sides stay nonempty."""
    d = np.unique(xs)
    if d.size < 2:
        raise UnsplittableClusterError("unsplittable cluster")
    mids = 0.5 * (d[:-1] + d[1:])
    grid = np.linspace(d[0], d[-1], 201)[1:-1]
    return np.unique(np.concatenate([mids, grid]))


def _objective_values(
    xs: np.ndarray, cand: np.ndarray, delta_hat: float, objective: str
) -> np.ndarray:
    n = xs.size
    f = np.searchsorted(xs, cand, side="right") / n
    lo = np.maximum(0.0, cand - delta_hat)
    hi = np.minimum(1.0, cand + delta_hat)
    count = np.searchsorted(xs, hi, side="right") - np.searchsorted(xs, lo, side="left")
    g = count / (n * (hi - lo))
    if objective == "alt":
        return 4.0 * (f - 0.5) ** 2 + g * g
    with np.errstate(divide="ignore", over="ignore"):
        balance = np.where((f > 0) & (f < 1), -np.log(f * (1.0 - f)), np.inf)
        return balance + np.exp(g)


def choose_delta(
    x,
    delta_hat: float = DEFAULT_DELTA_HAT,
    objective: str = "default",
) -> float:
    """Threshold minimizing the split objective over the candidate grid.

    Candidates lie strictly between the smallest and largest attained value,
    which guarantees both sides of the split are nonempty.  Objective ties
    break toward the candidate closest to the median of x, then toward the
    smallest candidate.  Raises when all values coincide.
    """
    if not 0.0 < delta_hat < 0.5:
        raise ValueError("delta_hat must lie in (0, 0.5)")
    if objective not in ("default", "alt"):
        raise ValueError("objective must be 'default' or 'alt'")
    xs = np.sort(np.asarray(x, dtype=np.float64))
    if xs.size < 2:
        raise UnsplittableClusterError("unsplittable cluster")
    cand = _candidate_grid(xs)
    vals = _objective_values(xs, cand, delta_hat, objective)
    best = np.min(vals)
    ties = cand[vals == best]
    med = float(np.median(xs))
    closest = np.abs(ties - med)
    return float(ties[closest == closest.min()][0])


def split_rank2(
    M,
    cluster,
    *,
    delta_hat: float = DEFAULT_DELTA_HAT,
    objective: str = "default",
    seed: int = 0,
) -> SplitResult:
    """Split a cluster with rank-two NMF and the tuned threshold.

    ``cluster`` indexes columns of M.  Raises UnsplittableClusterError when
    all column statistics coincide (e.g. identical columns).
    """
    idx = np.asarray(cluster, dtype=np.int64)
    if idx.size < 2:
        raise ValueError("cluster must contain at least 2 columns")
    A = np.asarray(M, dtype=np.float64)
    factors = rank2_nmf(A[:, idx], seed=seed)
    x = x_statistic(factors.H)
    delta = choose_delta(x, delta_hat, objective)
    mask = x >= delta
    return SplitResult(
        k1=idx[mask],
        k2=idx[~mask],
        delta_star=delta,
        x=x,
        method="rank2nmf",
    )


def _spa_init_centroids(A: np.ndarray, seed: int) -> np.ndarray:
    """Two starting centroids: rank-2-SVD smoothed columns at the SPA picks."""
    dec = svd2(A, seed=seed)
    X = np.vstack([dec.sigma1 * dec.v1, dec.sigma2 * dec.v2])
    sel = spa(X, 2)
    cols = [int(sel[0]), int(sel[1])]
    return np.outer(dec.u1, dec.sigma1 * dec.v1[cols]) + np.outer(
        dec.u2, dec.sigma2 * dec.v2[cols]
    )


def _normalize_columns(A: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(A, axis=0)
    out = A.copy()
    nz = norms > 0
    out[:, nz] /= norms[nz]
    return out


def lloyd_kmeans(
    A: np.ndarray,
    centroids: np.ndarray,
    mode: str = "euclidean",
    max_iter: int = 100,
    tol: float = 1e-6,
):
    """Lloyd iterations over the columns of A from the given centroids.

    mode "euclidean" uses squared distances; "spherical" assigns by cosine
    similarity on normalized columns.  An emptied cluster is repaired by
    reassigning the point farthest from its own centroid.  Returns
    (labels, centroids, objective_history).
    """
    if mode not in ("euclidean", "spherical"):
        raise ValueError("mode must be 'euclidean' or 'spherical'")
    k = centroids.shape[1]
    data = _normalize_columns(A) if mode == "spherical" else A
    C = _normalize_columns(centroids) if mode == "spherical" else centroids.copy()
    col_sq = np.einsum("ij,ij->j", data, data)
    history: list[float] = []
    labels = np.zeros(data.shape[1], dtype=np.int64)
    for _ in range(max_iter):
        if mode == "euclidean":
            cross = C.T @ data
            cent_sq = np.einsum("ij,ij->j", C, C)
            dist = cent_sq[:, None] - 2.0 * cross + col_sq[None, :]
            labels = np.argmin(dist, axis=0)
            obj = float(np.maximum(dist[labels, np.arange(data.shape[1])], 0.0).sum())
        else:
            sim = C.T @ data
            labels = np.argmax(sim, axis=0)
            obj = float((1.0 - sim[labels, np.arange(data.shape[1])]).sum())

        # repair empties before the update step
        for c in range(k):
            if not np.any(labels == c):
                if mode == "euclidean":
                    worst = int(np.argmax(dist[labels, np.arange(data.shape[1])]))
                else:
                    worst = int(np.argmin(sim[labels, np.arange(data.shape[1])]))
                labels[worst] = c

        history.append(obj)
        new_C = np.empty_like(C)
        for c in range(k):
            members = data[:, labels == c]
            center = members.mean(axis=1)
            if mode == "spherical":
                nc = np.linalg.norm(center)
                if nc > 0:
                    center = center / nc
                else:
                    center = C[:, c]
            new_C[:, c] = center
        C = new_C
        if len(history) >= 2:
            prev, cur = history[-2], history[-1]
            if abs(prev - cur) <= tol * max(abs(prev), 1e-300):
                break
    return labels, C, history


def split_kmeans(M, cluster, mode: str = "euclidean", *, seed: int = 0) -> SplitResult:
    """Two-cluster Lloyd split from the SPA-on-rank-2-SVD initialization."""
    idx = np.asarray(cluster, dtype=np.int64)
    if idx.size < 2:
        raise ValueError("cluster must contain at least 2 columns")
    A = np.asarray(M, dtype=np.float64)[:, idx]
    centroids = _spa_init_centroids(A, seed)
    labels, _, _ = lloyd_kmeans(A, centroids, mode=mode)
    mask = labels == 0
    x = np.where(mask, 1.0, 0.0)
    method = "kmeans" if mode == "euclidean" else "spherical_kmeans"
    return SplitResult(
        k1=idx[mask],
        k2=idx[~mask],
        delta_star=0.5,
        x=x,
        method=method,
    )


def _smoothed_rank_r(A: np.ndarray, r: int):
    """Rank-r smoothing: (U_r, U_r^T A) from the small-side Gram spectrum."""
    m, n = A.shape
    if m <= n:
        w, U = np.linalg.eigh(A @ A.T)
        U = U[:, np.argsort(w)[::-1][:r]]
    else:
        U, _, _ = np.linalg.svd(A, full_matrices=False)
        U = U[:, :r]
    return U, U.T @ A


def flat_kmeans(M, r: int, mode: str = "euclidean", *, seed: int = 0) -> np.ndarray:
    """Flat r-cluster Lloyd baseline with rank-r SVD + SPA initialization.

    Returns 1-based labels.  The starting centroids are the rank-r smoothed
    columns at the SPA-selected indices, which recovers pure pixels exactly
    in the separable noiseless case.
    """
    A = np.asarray(M, dtype=np.float64)
    if not 1 <= r <= A.shape[1]:
        raise ValueError("r out of range")
    U, X = _smoothed_rank_r(A, r)
    sel = spa(X, r)
    centroids = U @ X[:, sel]
    labels, _, _ = lloyd_kmeans(A, centroids, mode=mode)
    return labels.astype(np.int64) + 1
