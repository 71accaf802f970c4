"""Synthetic spectra-mixture instances and the clustering benchmark harness.

Instances follow a fixed recipe: r endmember spectra, unbalanced clusters of
pixels that each contain at least 90% of one endmember (the remainder is a
sparse Dirichlet mixture), optional per-pixel illumination scaling, optional
outliers plus zero background pixels, and per-pixel Gaussian noise scaled by
the average endmember norm.  Negative entries are clamped to zero at the
end.  Everything is driven by one seed, so instances are bit-reproducible.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .hierarchy import run_h2nmf
from .splitter import flat_kmeans

__all__ = [
    "SynthConfig",
    "SynthInstance",
    "procedural_spectra",
    "generate",
    "accuracy",
    "run_benchmark",
    "BENCH_ALGORITHMS",
]

PRNG_ID = "numpy-pcg64"

BENCH_ALGORITHMS = ("h2nmf", "hkm", "hspkm", "km", "spkm")

N_OUTLIERS = 10
N_BACKGROUND = 40


@dataclass
class SynthConfig:
    """Generator knobs: noise level, scaling / outlier flags, seed, sizes."""

    epsilon: float = 0.0
    s: int = 0
    b: int = 0
    seed: int = 0
    r: int = 6
    bands: int = 188
    cluster_sizes: tuple[int, ...] | None = None
    spectra_csv: str | None = None

    def sizes(self) -> tuple[int, ...]:
        if self.cluster_sizes is not None:
            sizes = tuple(int(s) for s in self.cluster_sizes)
        else:
            sizes = tuple(500 - 50 * k for k in range(self.r))
        if len(sizes) != self.r or any(s <= 0 for s in sizes):
            raise ValueError("cluster sizes must be positive, one per endmember")
        return sizes


@dataclass
class SynthInstance:
    """Generated matrix with its ground truth.

    ``true_labels`` holds 1..r for mixture pixels and 0 for columns that
    belong to no cluster (outliers and zero background pixels).  ``K_W`` is
    the average endmember norm used to scale outliers and noise.
    """

    M: np.ndarray
    W_true: np.ndarray
    H_true: np.ndarray
    true_labels: np.ndarray
    K_W: float
    metadata: dict = field(default_factory=dict)


def procedural_spectra(m: int, r: int, seed=0):
    """Smooth positive synthetic spectra with per-material features.

    Each column is a positive baseline plus 2-3 dominant Gaussian features
    inside the material's own spectral window and 1-2 weak features placed
    anywhere, normalized to unit Euclidean norm.  The windowed features
    keep the signatures angularly spread (like distinct absorption bands)
    while the shared baseline and cross features keep them correlated;
    draws are rejected until the condition number lands in a moderate
    range.  Returns ``(W, metadata)`` with the condition number reported.
    """
    if m < r:
        raise ValueError("need at least as many bands as spectra")
    rng = np.random.default_rng(seed)
    grid = np.arange(m, dtype=np.float64)
    win = m / r
    cond = float("inf")
    W = np.empty((m, r))
    for attempt in range(200):
        for k in range(r):
            spectrum = np.full(m, rng.uniform(0.04, 0.10))
            for _ in range(int(rng.integers(2, 4))):
                center = (k + rng.uniform(0.15, 0.85)) * win
                width = rng.uniform(win / 6.0, win / 2.5)
                amp = rng.uniform(0.8, 1.0)
                spectrum += amp * np.exp(-0.5 * ((grid - center) / width) ** 2)
            for _ in range(int(rng.integers(1, 3))):
                center = rng.uniform(0, m)
                width = rng.uniform(m / 30.0, m / 8.0)
                amp = rng.uniform(0.03, 0.12)
                spectrum += amp * np.exp(-0.5 * ((grid - center) / width) ** 2)
            W[:, k] = spectrum / np.linalg.norm(spectrum)
        cond = float(np.linalg.cond(W))
        gram = W.T @ W
        max_cos = float(np.abs(gram - np.diag(np.diag(gram))).max()) if r > 1 else 0.0
        if r == 1 or (cond < 25.0 and max_cos <= 0.35):
            return W, {"condition_number": cond, "attempts": attempt + 1}
    return W, {"condition_number": cond, "attempts": 200}


def _dirichlet(rng: np.random.Generator, r: int, alpha: float = 0.1) -> np.ndarray:
    # via normalized Gamma draws; shape 0.1 concentrates mass on few entries
    while True:
        g = rng.gamma(alpha, 1.0, size=r)
        total = g.sum()
        if total > 0:
            return g / total


def _load_spectra_csv(path: str, r: int) -> np.ndarray:
    from .io import FormatError, load_matrix_csv

    W = load_matrix_csv(path).data
    if W.shape[1] < r:
        raise FormatError(f"spectra file has {W.shape[1]} columns, need {r}")
    if W.shape[0] < 2:
        raise FormatError("spectra file has too few bands")
    return W[:, :r]


def generate(config: SynthConfig) -> SynthInstance:
    """Draw one synthetic instance.  Deterministic per seed."""
    if config.epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    sizes = config.sizes()
    r = config.r
    ss = np.random.SeedSequence(config.seed)
    ss_w, ss_rest = ss.spawn(2)
    if config.spectra_csv is not None:
        W = _load_spectra_csv(config.spectra_csv, r)
        meta: dict = {"spectra": config.spectra_csv}
    else:
        W, meta = procedural_spectra(config.bands, r, seed=ss_w)
        meta = {"spectra": "procedural", **meta}
    m = W.shape[0]
    rng = np.random.default_rng(ss_rest)

    n_mix = sum(sizes)
    H = np.zeros((r, n_mix))
    labels = np.zeros(n_mix, dtype=np.int64)
    col = 0
    for k, size in enumerate(sizes):
        for _ in range(size):
            H[:, col] = 0.1 * _dirichlet(rng, r)
            H[k, col] += 0.9
            labels[col] = k + 1
            col += 1
    H_true = H.copy()
    scales = None
    if config.s:
        scales = rng.uniform(0.8, 1.0, size=n_mix)
        H = H * scales[None, :]

    K_W = float(np.mean(np.linalg.norm(W, axis=0)))
    blocks = [W @ H]
    if config.b:
        Z = rng.uniform(0.0, 1.0, size=(m, N_OUTLIERS))
        Z = K_W * Z / np.linalg.norm(Z, axis=0, keepdims=True)
        blocks.append(Z)
        blocks.append(np.zeros((m, N_BACKGROUND)))
        labels = np.concatenate(
            [labels, np.zeros(N_OUTLIERS + N_BACKGROUND, dtype=np.int64)]
        )
    M = np.concatenate(blocks, axis=1)

    if config.epsilon > 0:
        n = M.shape[1]
        noise = rng.standard_normal((m, n))
        noise *= config.epsilon * K_W * rng.uniform(0.0, 1.0, size=n)[None, :]
        M = M + noise
    M = np.maximum(M, 0.0)

    meta.update({"prng": PRNG_ID, "seed": config.seed})
    if scales is not None:
        meta["scales"] = scales
    return SynthInstance(
        M=M,
        W_true=W,
        H_true=H_true,
        true_labels=labels,
        K_W=K_W,
        metadata=meta,
    )


def accuracy(predicted_labels, true_labels, r: int) -> float:
    """Best label-permutation overlap fraction.

    Columns with true label 0 belong to no cluster (outliers, background)
    and are excluded from both the numerator and the denominator.
    """
    pred = np.asarray(predicted_labels, dtype=np.int64)
    true = np.asarray(true_labels, dtype=np.int64)
    if pred.shape != true.shape:
        raise ValueError("label vectors must have the same length")
    mask = true > 0
    if not mask.any():
        raise ValueError("no labeled columns")
    pred = pred[mask]
    true = true[mask]
    if true.max() > r or pred.max() > r or pred.min() < 1:
        raise ValueError("labels out of range for r clusters")
    overlap = np.zeros((r, r))
    for k in range(1, r + 1):
        sel = pred[true == k]
        if sel.size:
            counts = np.bincount(sel, minlength=r + 1)[1:]
            overlap[k - 1] = counts
    rows, cols = linear_sum_assignment(-overlap)
    return float(overlap[rows, cols].sum() / true.size)


def _run_algorithm(algorithm: str, M: np.ndarray, r: int) -> np.ndarray:
    if algorithm == "h2nmf":
        return run_h2nmf(M, r, splitter="rank2nmf").flatten()
    if algorithm == "hkm":
        return run_h2nmf(M, r, splitter="kmeans").flatten()
    if algorithm == "hspkm":
        return run_h2nmf(M, r, splitter="spherical_kmeans").flatten()
    if algorithm == "km":
        return flat_kmeans(M, r, mode="euclidean")
    if algorithm == "spkm":
        return flat_kmeans(M, r, mode="spherical")
    raise ValueError(f"unknown algorithm {algorithm!r}")


def run_benchmark(
    epsilons,
    s: int,
    b: int,
    trials: int,
    algorithms=("h2nmf", "hkm", "hspkm", "spkm"),
    *,
    seed: int = 0,
    r: int = 6,
    bands: int = 188,
    csv_path=None,
    spectra_csv: str | None = None,
):
    """Mean accuracy and wall time per (noise level, algorithm).

    Each (epsilon, trial) pair draws one instance shared by every algorithm,
    with an independent seed stream spawned from (seed, epsilon index,
    trial).  Returns one summary row per (epsilon, algorithm); when
    ``csv_path`` is given, per-trial rows are written with columns
    epsilon,s,b,algorithm,trial,accuracy,seconds.
    """
    algorithms = [a.lower() for a in algorithms]
    for a in algorithms:
        if a not in BENCH_ALGORITHMS:
            raise ValueError(f"unknown algorithm {a!r}")
    rows = []
    for ei, eps in enumerate(epsilons):
        per_algo: dict[str, list[tuple[float, float]]] = {a: [] for a in algorithms}
        for trial in range(trials):
            trial_seed = int(
                np.random.SeedSequence([seed, ei, trial]).generate_state(1)[0]
            )
            inst = generate(
                SynthConfig(
                    epsilon=float(eps),
                    s=s,
                    b=b,
                    seed=trial_seed,
                    r=r,
                    bands=bands,
                    spectra_csv=spectra_csv,
                )
            )
            for algo in algorithms:
                start = time.perf_counter()
                labels = _run_algorithm(algo, inst.M, r)
                elapsed = time.perf_counter() - start
                acc = accuracy(labels, inst.true_labels, r)
                per_algo[algo].append((acc, elapsed))
        for algo in algorithms:
            accs = [a for a, _ in per_algo[algo]]
            secs = [t for _, t in per_algo[algo]]
            rows.append(
                {
                    "epsilon": float(eps),
                    "s": s,
                    "b": b,
                    "algorithm": algo,
                    "trials": trials,
                    "mean_accuracy": float(np.mean(accs)),
                    "mean_seconds": float(np.mean(secs)),
                    "per_trial": per_algo[algo],
                }
            )
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["epsilon", "s", "b", "algorithm", "trial", "accuracy", "seconds"]
            )
            for row in rows:
                for trial, (acc, sec) in enumerate(row["per_trial"]):
                    writer.writerow(
                        [
                            f"{row['epsilon']:.6g}",
                            row["s"],
                            row["b"],
                            row["algorithm"],
                            trial,
                            f"{acc:.6f}",
                            f"{sec:.6f}",
                        ]
                    )
    return rows
