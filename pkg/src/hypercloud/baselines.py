"""Graph-signal-processing baselines: Gaussian-kernel graph, GFT downsampling,
TV and Laplacian-regularized denoisers, and an iterative mesh-Laplacian
smoothing stand-in."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.spatial import cKDTree

from .pointcloud import PointCloud

DEFAULT_KNN = 8


@dataclass(frozen=True)
class GspGraph:
    """Thresholded Gaussian-kernel graph over point positions.

    weights[i, j] = exp(-||s_i - s_j||^2 / delta^2) when the squared distance
    is within the threshold and i != j, else 0.  laplacian = D - W.
    """

    weights: np.ndarray
    delta: float
    threshold: float
    laplacian: np.ndarray

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.weights.sum(axis=1)


def default_graph_params(cloud: PointCloud, knn: int = DEFAULT_KNN):
    """Data-adaptive kernel width and threshold.

    threshold: median (over points) squared distance to the knn-th nearest
    neighbor; delta^2: mean kept nonzero squared distance.
    """
    return _auto_graph_params(cloud, _pairwise_sq_dists(cloud.coords), knn)


def _auto_graph_params(cloud: PointCloud, d2: np.ndarray, knn: int = DEFAULT_KNN):
    X = cloud.coords
    n = cloud.n
    k = min(knn, n - 1)
    if k < 1:
        return 1.0, 1.0
    tree = cKDTree(X)
    dists, _ = tree.query(X, k=k + 1)
    threshold = float(np.median(dists[:, k] ** 2))
    if threshold <= 0:
        threshold = 1.0
    kept = d2[(d2 <= threshold) & (d2 > 0)]
    delta_sq = float(kept.mean()) if kept.size else threshold
    if delta_sq <= 0:
        delta_sq = threshold
    return float(np.sqrt(delta_sq)), threshold


def _pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def build_gaussian_graph(cloud: PointCloud, delta: float | None = None,
                         threshold: float | None = None) -> GspGraph:
    """Construct the thresholded Gaussian-kernel graph and its Laplacian."""
    d2 = _pairwise_sq_dists(cloud.coords)
    if delta is None or threshold is None:
        d_auto, t_auto = _auto_graph_params(cloud, d2)
        delta = d_auto if delta is None else float(delta)
        threshold = t_auto if threshold is None else float(threshold)
    if delta <= 0 or threshold <= 0:
        raise ValueError("delta and threshold must be positive")
    W = np.where(d2 <= threshold, np.exp(-d2 / (delta * delta)), 0.0)
    np.fill_diagonal(W, 0.0)
    L = np.diag(W.sum(axis=1)) - W
    W.setflags(write=False)
    L.setflags(write=False)
    return GspGraph(weights=W, delta=float(delta), threshold=float(threshold),
                    laplacian=L)


def graph_frequency_basis(graph: GspGraph) -> np.ndarray:
    """Laplacian eigenvectors ordered by ascending eigenvalue."""
    _, vecs = scipy.linalg.eigh(graph.laplacian)
    return vecs


def gft_downsample(cloud: PointCloud, graph: GspGraph, keep: int) -> PointCloud:
    """Project each coordinate column onto the lowest `keep` graph frequencies."""
    n = cloud.n
    if not 1 <= keep <= n:
        raise ValueError(f"keep must be in [1, {n}], got {keep}")
    U = graph_frequency_basis(graph)[:, :keep]
    recovered = U @ (U.T @ cloud.coords)
    return PointCloud(recovered)


def _row_normalized(graph: GspGraph):
    deg = graph.degrees
    active = deg > 0
    Wt = np.zeros_like(graph.weights)
    if np.any(active):
        Wt[active] = graph.weights[active] / deg[active, None]
    return Wt, active


def gsp_tv_denoise(cloud: PointCloud, graph: GspGraph, alpha: float) -> PointCloud:
    """Quadratic graph-TV denoiser with the row-normalized adjacency.

    Solves Y_i = argmin ||X_i - Y_i||^2 + alpha ||(I - Wn) Y_i||^2 per
    coordinate; isolated nodes are passed through untouched.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    Wt, active = _row_normalized(graph)
    out = cloud.coords.copy()
    idx = np.flatnonzero(active)
    if idx.size:
        B = np.eye(idx.size) - Wt[np.ix_(idx, idx)]
        A = np.eye(idx.size) + alpha * (B.T @ B)
        cho = scipy.linalg.cho_factor(A)
        out[idx] = scipy.linalg.cho_solve(cho, cloud.coords[idx])
    return PointCloud(out)


def laplacian_reg_denoise(cloud: PointCloud, graph: GspGraph,
                          alpha: float) -> PointCloud:
    """Laplacian-regularized denoiser: Y_i = (I + alpha L)^{-1} X_i."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    A = np.eye(cloud.n) + alpha * graph.laplacian
    cho = scipy.linalg.cho_factor(A)
    return PointCloud(scipy.linalg.cho_solve(cho, cloud.coords))


def mls_denoise(cloud: PointCloud, graph: GspGraph, iterations: int = 10,
                step: float = 0.5) -> PointCloud:
    """Umbrella-operator smoothing: Y <- Y - step * D^{-1} L Y per iteration.

    Stand-in for mesh Laplacian smoothing; isolated nodes never move.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if not 0.0 < step <= 1.0:
        raise ValueError("step must be in (0, 1]")
    Wt, active = _row_normalized(graph)
    Y = cloud.coords.copy()
    for _ in range(iterations):
        smoothed = Wt @ Y
        Y[active] = (1.0 - step) * Y[active] + step * smoothed[active]
    return PointCloud(Y)


def dump_graph_csv(graph: GspGraph, path) -> None:
    """Write the upper-triangular edge list as CSV rows (i, j, weight)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,j,weight\n")
        n = graph.n
        for i in range(n):
            row = graph.weights[i]
            for j in range(i + 1, n):
                if row[j] != 0.0:
                    fh.write(f"{i},{j},{row[j]!r}\n")
