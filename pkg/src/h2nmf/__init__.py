"""Hierarchical rank-two NMF clustering toolkit.

Divisive clustering of nonnegative spectra-as-columns matrices: clusters are
split with a rank-two NMF plus a balance/stability threshold, the leaf with
the largest error reduction is split next, and leaves can be turned into
endmember signatures with per-pixel abundances.  Includes the synthetic
benchmark generator, file formats, a CLI, and an interactive session
service.
"""

from ._backend import BACKEND
from .endmembers import (
    EndmemberSet,
    abundance_maps,
    extract_pure_pixels,
    match_and_score,
    mrsa,
    rank1_signature,
)
from .hierarchy import ClusterNode, ClusterTree, PendingSplit, run_h2nmf
from .io import DataMatrix
from .linalg import Svd2, leading_sigma_sq, nnls2, nnls_columns, spa, svd2
from .rank2nmf import (
    DegenerateFactorsError,
    Rank2Factors,
    check_nonneg_rank2_condition,
    rank2_nmf,
)
from .splitter import (
    SplitResult,
    UnsplittableClusterError,
    choose_delta,
    empirical_cdf,
    flat_kmeans,
    split_kmeans,
    split_objective,
    split_rank2,
    window_density,
    x_statistic,
)
from .synth import SynthConfig, SynthInstance, accuracy, generate, procedural_spectra, run_benchmark

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ClusterNode",
    "ClusterTree",
    "DataMatrix",
    "DegenerateFactorsError",
    "EndmemberSet",
    "PendingSplit",
    "Rank2Factors",
    "SplitResult",
    "SynthConfig",
    "SynthInstance",
    "Svd2",
    "UnsplittableClusterError",
    "abundance_maps",
    "accuracy",
    "check_nonneg_rank2_condition",
    "choose_delta",
    "empirical_cdf",
    "extract_pure_pixels",
    "flat_kmeans",
    "generate",
    "leading_sigma_sq",
    "match_and_score",
    "mrsa",
    "nnls2",
    "nnls_columns",
    "procedural_spectra",
    "rank1_signature",
    "rank2_nmf",
    "run_benchmark",
    "run_h2nmf",
    "spa",
    "split_kmeans",
    "split_objective",
    "split_rank2",
    "svd2",
    "window_density",
    "x_statistic",
]
