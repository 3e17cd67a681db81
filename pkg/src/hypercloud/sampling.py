"""Feature-preserving resampling via the high-pass filter and bandlimited
downsampling via the hypergraph Fourier transform."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pointcloud import PointCloud
from .spectral import SpectralPairs, SupportingMatrix, hgft, ihgft


@dataclass(frozen=True)
class HpfScores:
    """Per-node squared residual of the high-pass filter H = I - P_s."""

    scores: np.ndarray

    @property
    def n(self) -> int:
        return self.scores.shape[0]


def hpf_scores(cloud: PointCloud, psmatrix: SupportingMatrix) -> HpfScores:
    """Squared row norms of the filtered coordinates (I - P_s) X."""
    if psmatrix.n != cloud.n:
        raise ValueError(f"supporting matrix dim {psmatrix.n} != cloud size {cloud.n}")
    filtered = cloud.coords - psmatrix.matrix @ cloud.coords
    scores = np.sum(filtered * filtered, axis=1)
    scores.setflags(write=False)
    return HpfScores(scores=scores)


def sample_top_k(scores: HpfScores, cloud: PointCloud, k: int):
    """The k highest-scoring points; ties go to the lower index.

    Returns (subset cloud, index array ordered by descending score).
    """
    n = cloud.n
    if scores.n != n:
        raise ValueError("scores and cloud sizes differ")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    order = np.lexsort((np.arange(n), -scores.scores))
    chosen = order[:k]
    return PointCloud(cloud.coords[chosen]), chosen


def hgft_downsample(cloud: PointCloud, pairs: SpectralPairs, keep: int):
    """Keep the lowest `keep` frequency components of each coordinate.

    Returns (kept signed coefficients as a keep x 3 array, recovered cloud).
    """
    n = cloud.n
    if pairs.n != n:
        raise ValueError("pairs and cloud sizes differ")
    if not 1 <= keep <= n:
        raise ValueError(f"keep must be in [1, {n}], got {keep}")
    kept = np.empty((keep, 3))
    recovered = np.empty((n, 3))
    for i in range(3):
        coeffs = hgft(pairs, cloud.coords[:, i])
        kept[:, i] = coeffs.signed[:keep]
        recovered[:, i] = ihgft(pairs, coeffs, keep)
    return kept, PointCloud(recovered)
