"""Endmember extraction from a flattened cluster hierarchy.

Each cluster is summarized by its leading singular pair; the cluster member
closest to that direction in mean-removed spectral angle becomes the
extracted pure pixel.  Abundances are per-pixel nonnegative least squares
against the extracted signatures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment, nnls as _scipy_nnls

from .linalg import leading_triplet

__all__ = [
    "EndmemberSet",
    "rank1_signature",
    "mrsa",
    "extract_pure_pixels",
    "match_and_score",
    "abundance_maps",
]


@dataclass
class EndmemberSet:
    """Extracted spectral signatures with their source pixels and abundances.

    ``signatures`` is m x r (columns are pixel spectra), ``pixel_indices``
    locates those pixels in the data matrix, ``abundances`` is the r x n
    nonnegative weight matrix, and ``leaf_ids`` names the originating
    clusters.
    """

    signatures: np.ndarray
    pixel_indices: np.ndarray | None
    abundances: np.ndarray
    leaf_ids: list[int]


def rank1_signature(M, cluster):
    """Leading singular pair (u, v) of a cluster, fixed nonnegative.

    ``M[:, cluster] ~ u v^T`` with the singular value folded into u.  The
    sign is flipped so the entries of u sum nonnegative; stray negatives at
    round-off level (magnitude <= 1e-12) are clamped to zero.  For a
    nonnegative matrix the exact leading pair is nonnegative, so anything
    larger would indicate non-convergence and is left untouched.
    """
    idx = np.asarray(cluster, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("empty cluster")
    sub = np.asarray(M, dtype=np.float64)[:, idx]
    u, sigma, v = leading_triplet(sub)
    if u.sum() < 0:
        u, v = -u, -v
    u = u * sigma
    for vec in (u, v):
        tiny = (vec < 0) & (vec >= -1e-12)
        vec[tiny] = 0.0
    return u, v


def mrsa(x, y) -> float:
    """Mean-removed spectral angle, normalized to [0, 1].

    Invariant to positive scaling and constant offsets of either argument;
    symmetric.  Constant vectors have no direction after mean removal and
    raise a domain error.
    """
    a = np.asarray(x, dtype=np.float64).reshape(-1)
    b = np.asarray(y, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError("spectra must have the same length")
    a = a - a.mean()
    b = b - b.mean()
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("zero mean-removed norm")
    c = float(np.clip((a @ b) / (na * nb), -1.0, 1.0))
    return float(np.arccos(c) / np.pi)


def _mrsa_to_columns(u: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """MRSA of u against every column; constant columns score +inf."""
    uc = u - u.mean()
    nu = np.linalg.norm(uc)
    centered = cols - cols.mean(axis=0, keepdims=True)
    norms = np.linalg.norm(centered, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = (uc @ centered) / (nu * norms)
    out = np.full(cols.shape[1], np.inf)
    ok = (norms > 0) & np.isfinite(cos)
    out[ok] = np.arccos(np.clip(cos[ok], -1.0, 1.0)) / np.pi
    return out


def extract_pure_pixels(M, tree) -> EndmemberSet:
    """One pixel per leaf: the member closest in MRSA to the leaf's leading
    singular direction (ties to the smallest index)."""
    A = np.asarray(M, dtype=np.float64)
    leaf_ids = tree.leaf_ids
    picks = []
    for leaf_id in leaf_ids:
        idx = tree.nodes[leaf_id].index_set
        u, _ = rank1_signature(A, idx)
        if np.linalg.norm(u - u.mean()) == 0.0:
            picks.append(int(idx[0]))
            continue
        scores = _mrsa_to_columns(u, A[:, idx])
        if not np.isfinite(scores).any():
            picks.append(int(idx[0]))
        else:
            picks.append(int(idx[np.argmin(scores)]))
    pixel_indices = np.asarray(picks, dtype=np.int64)
    signatures = A[:, pixel_indices]
    return EndmemberSet(
        signatures=signatures,
        pixel_indices=pixel_indices,
        abundances=abundance_maps(A, signatures),
        leaf_ids=list(leaf_ids),
    )


def match_and_score(extracted, truth):
    """Match extracted signatures to reference ones by total MRSA.

    Solves the optimal assignment on the r x r MRSA cost matrix.  Returns
    ``(permutation, per_endmember, average)`` where ``permutation[k]`` is the
    extracted column matched to reference column k.
    """
    E = np.asarray(extracted, dtype=np.float64)
    T = np.asarray(truth, dtype=np.float64)
    if E.shape != T.shape:
        raise ValueError("extracted and truth must have matching shapes")
    r = T.shape[1]
    cost = np.empty((r, r))
    for i in range(r):
        for j in range(r):
            cost[i, j] = mrsa(T[:, i], E[:, j])
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(r, dtype=np.int64)
    perm[rows] = cols
    per = [float(cost[k, perm[k]]) for k in range(r)]
    return perm, per, float(np.mean(per))


def abundance_maps(M, signatures) -> np.ndarray:
    """Per-pixel nonnegative least squares against the signature matrix.

    Active-set solver per column (exact at small r).  For r = 2 this agrees
    with the two-variable kernel.
    """
    A = np.asarray(M, dtype=np.float64)
    W = np.asarray(signatures, dtype=np.float64)
    if W.ndim != 2 or W.shape[1] < 1:
        raise ValueError("signatures must be an m x r matrix with r >= 1")
    if W.shape[0] != A.shape[0]:
        raise ValueError("row mismatch between M and signatures")
    H = np.empty((W.shape[1], A.shape[1]))
    for j in range(A.shape[1]):
        H[:, j] = _scipy_nnls(W, A[:, j])[0]
    return H
