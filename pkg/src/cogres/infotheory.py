"""Nonparametric entropy and mutual information on copula-transformed samples.

Entropy is estimated from k-nearest-neighbor distances (the Leonenko
Pronzato Savani construction for Renyi exponents below one, evaluated at
0.99999 as the Shannon limit).  Mutual information combines four entropy
terms per shuffle:

    MI(X,Y) = -H([X Y]) + mean_i( H([X Y~i]) + H([X~i Y]) - H([X~i Y~i]) )

where X~i, Y~i are independent row permutations.  The permuted copies have
exactly the same margins as the originals, so the additive bias of the
entropy estimator (including copula boundary effects) cancels term by term.

Everything is reported in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gammaln, logsumexp, xlogy
from scipy.stats import rankdata

__all__ = [
    "MIEstimate",
    "copula_transform",
    "dither_duplicates",
    "renyi_entropy",
    "mutual_information",
    "conditional_mi",
    "binary_entropy",
    "invert_binary_entropy",
    "DEFAULT_ALPHA",
    "DEFAULT_K",
    "DEFAULT_SHUFFLES",
    "SANITY_FLOOR",
]

DEFAULT_ALPHA = 0.99999
DEFAULT_K = 3
DEFAULT_SHUFFLES = 10
# Minimum samples per dimension for any estimation call.
SANITY_FLOOR = 10


@dataclass(frozen=True, slots=True)
class MIEstimate:
    """Shuffle-corrected mutual information in bits.

    ``shuffle_values`` holds the per-shuffle correction terms; their standard
    deviation is the quoted dispersion.  For conditional estimates the terms
    are differences between the two constituent estimates under shared
    permutations.
    """

    value: float
    shuffle_values: tuple[float, ...]
    dispersion: float
    seed: int


def _as_matrix(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"expected 1-D or 2-D samples, got shape {arr.shape}")
    if arr.shape[0] < 2 or arr.shape[1] < 1:
        raise ValueError(f"need at least 2 samples and 1 column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("samples contain non-finite entries")
    return arr


def copula_transform(matrix) -> np.ndarray:
    """Map each column to average ranks scaled by 1/(n+1), entries in (0,1)."""
    arr = _as_matrix(matrix)
    return rankdata(arr, method="average", axis=0) / (arr.shape[0] + 1)


def _dither_width(column: np.ndarray) -> float:
    distinct = np.unique(column)
    if distinct.size > 1:
        return 0.3 * float(np.min(np.diff(distinct)))
    # constant column: any positive width breaks the tie
    scale = abs(float(distinct[0]))
    return 0.3 * scale if scale > 0 else 0.3


def dither_duplicates(matrix, rng: np.random.Generator) -> np.ndarray:
    """Add centered uniform noise to every column that contains ties.

    The width is 0.3x the smallest gap between distinct values, so the order
    of distinct values is preserved; columns without ties pass through
    unchanged.  Needed because the NN estimator assumes a continuous density.
    """
    arr = _as_matrix(matrix).copy()
    for j in range(arr.shape[1]):
        col = arr[:, j]
        if np.unique(col).size < col.size:
            w = _dither_width(col)
            arr[:, j] = col + rng.uniform(-0.5 * w, 0.5 * w, size=col.size)
    return arr


def _drop_redundant_columns(mat: np.ndarray) -> np.ndarray:
    """Drop columns that exactly duplicate (or rank-reverse) an earlier one.

    Applied per block after the copula transform.  A duplicated column spans
    no extra dimension: it would put the joint sample on a measure-zero
    manifold where NN distances misrepresent the density and the shuffle
    terms cannot cancel the bias.  Dropping it leaves the true MI unchanged
    (the copy carries no information beyond the original).
    """
    if mat.shape[1] < 2:
        return mat
    keep: list[int] = []
    for j in range(mat.shape[1]):
        col = mat[:, j]
        redundant = False
        for i in keep:
            prev = mat[:, i]
            if np.array_equal(col, prev) or np.allclose(
                col + prev, 1.0, rtol=0.0, atol=1e-12
            ):
                redundant = True
                break
        if not redundant:
            keep.append(j)
    if len(keep) == mat.shape[1]:
        return mat
    return mat[:, keep]


def _entropy_knn(points: np.ndarray, alpha: float, k: int, workers: int) -> float:
    """NN-distance entropy of a duplicate-free sample, in bits."""
    n, d = points.shape
    tree = cKDTree(points)
    dist, _ = tree.query(points, k=k + 1, workers=workers)
    rho = dist[:, k]
    if np.any(rho == 0.0):
        raise ValueError("zero nearest-neighbor distance; input needs dithering")
    log_vd = 0.5 * d * math.log(math.pi) - gammaln(0.5 * d + 1.0)
    log_ck = (gammaln(k) - gammaln(k + 1.0 - alpha)) / (1.0 - alpha)
    log_zeta = math.log(n - 1) + log_ck + log_vd + d * np.log(rho)
    log_i = logsumexp((1.0 - alpha) * log_zeta) - math.log(n)
    return float(log_i / (1.0 - alpha) / math.log(2.0))


def _check_estimator_args(n: int, d: int, alpha: float, k: int) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0,1), got {alpha}")
    if k < 1:
        raise ValueError("k_neighbors must be >= 1")
    if n <= k:
        raise ValueError(f"need more than k={k} samples, got {n}")
    if n < SANITY_FLOOR * d:
        raise ValueError(
            f"{n} samples in {d} dimensions is below the {SANITY_FLOOR}x floor"
        )


def renyi_entropy(
    matrix,
    alpha: float = DEFAULT_ALPHA,
    k_neighbors: int = DEFAULT_K,
    seed: int = 0,
    workers: int = -1,
) -> float:
    """Entropy of the sample's underlying continuous density, in bits.

    Columns with tied values are dithered first (seeded); the seed is unused
    otherwise.
    """
    arr = _as_matrix(matrix)
    _check_estimator_args(arr.shape[0], arr.shape[1], alpha, k_neighbors)
    needs_dither = any(
        np.unique(arr[:, j]).size < arr.shape[0] for j in range(arr.shape[1])
    )
    if needs_dither:
        arr = dither_duplicates(arr, np.random.default_rng(seed))
    return _entropy_knn(arr, alpha, k_neighbors, workers)


def mutual_information(
    x,
    y,
    n_shuffles: int = DEFAULT_SHUFFLES,
    seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
    k_neighbors: int = DEFAULT_K,
    workers: int = -1,
) -> MIEstimate:
    """Shuffle-corrected MI between paired samples, in bits.

    Ties are dithered, every column is copula transformed, and the shuffle
    permutations come from a stream independent of the dither stream, so two
    calls with the same seed and row count use identical permutations no
    matter how much dither noise each consumed.
    """
    x = _as_matrix(x)
    y = _as_matrix(y)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"row counts differ: {x.shape[0]} vs {y.shape[0]}")
    if n_shuffles < 1:
        raise ValueError("n_shuffles must be >= 1")
    n = x.shape[0]
    d = x.shape[1] + y.shape[1]
    _check_estimator_args(n, d, alpha, k_neighbors)

    dither_ss, perm_ss = np.random.SeedSequence(seed).spawn(2)
    dither_rng = np.random.default_rng(dither_ss)
    xc = _drop_redundant_columns(
        copula_transform(dither_duplicates(x, dither_rng))
    )
    yc = _drop_redundant_columns(
        copula_transform(dither_duplicates(y, dither_rng))
    )
    perm_rng = np.random.default_rng(perm_ss)

    h_joint = _entropy_knn(np.hstack((xc, yc)), alpha, k_neighbors, workers)
    corrections = []
    for _ in range(n_shuffles):
        px = perm_rng.permutation(n)
        py = perm_rng.permutation(n)
        xs = xc[px]
        ys = yc[py]
        corrections.append(
            _entropy_knn(np.hstack((xc, ys)), alpha, k_neighbors, workers)
            + _entropy_knn(np.hstack((xs, yc)), alpha, k_neighbors, workers)
            - _entropy_knn(np.hstack((xs, ys)), alpha, k_neighbors, workers)
        )
    value = -h_joint + float(np.mean(corrections))
    dispersion = float(np.std(corrections, ddof=1)) if n_shuffles > 1 else 0.0
    return MIEstimate(
        value=value,
        shuffle_values=tuple(float(c) for c in corrections),
        dispersion=dispersion,
        seed=seed,
    )


def conditional_mi(
    x,
    y,
    z,
    n_shuffles: int = DEFAULT_SHUFFLES,
    seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
    k_neighbors: int = DEFAULT_K,
    workers: int = -1,
) -> MIEstimate:
    """CMI(X,Y|Z) = MI(X,[Y Z]) - MI(X,Z), both terms under the same seed.

    Equal row counts mean both terms draw identical permutation sequences,
    so the per-shuffle corrections pair up; shuffle_values holds their
    differences.
    """
    y = _as_matrix(y)
    z = _as_matrix(z)
    if y.shape[0] != z.shape[0]:
        raise ValueError(f"row counts differ: {y.shape[0]} vs {z.shape[0]}")
    joint = mutual_information(
        x, np.hstack((y, z)), n_shuffles, seed, alpha, k_neighbors, workers
    )
    base = mutual_information(x, z, n_shuffles, seed, alpha, k_neighbors, workers)
    diffs = tuple(a - b for a, b in zip(joint.shuffle_values, base.shuffle_values))
    dispersion = float(np.std(diffs, ddof=1)) if len(diffs) > 1 else 0.0
    return MIEstimate(
        value=joint.value - base.value,
        shuffle_values=diffs,
        dispersion=dispersion,
        seed=seed,
    )


def binary_entropy(p: float) -> float:
    """S(p) = -p log2 p - (1-p) log2 (1-p), with S(0) = S(1) = 0."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0,1], got {p}")
    return float(-(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p)) / math.log(2.0))


def invert_binary_entropy(h: float) -> float:
    """The root p >= 0.5 of binary_entropy(p) = h, by bisection to 1e-6."""
    if not 0.0 <= h <= 1.0:
        raise ValueError(f"entropy must be in [0,1] bits, got {h}")
    lo, hi = 0.5, 1.0
    # binary_entropy is strictly decreasing on [0.5, 1]
    while hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) > h:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
