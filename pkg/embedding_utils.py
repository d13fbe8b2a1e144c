"""
Embedding Utilities Module
Local intrinsic dimensionality and local PCA around an explained instance
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree

from error_utils import ConfigError, EstimationError


def _rows_of(data) -> np.ndarray:
    return np.asarray(getattr(data, 'rows', data), dtype=float)


def nearest_neighbours(rows: np.ndarray, z: np.ndarray, k: int, exclude_self: bool = False):
    """
    k nearest rows of z by euclidean distance.

    Args:
        rows: n x d matrix
        z: Query point
        k: Number of neighbours wanted
        exclude_self: Skip rows at distance zero from z

    Returns:
        Tuple of (distances, indices), ascending by distance
    """
    tree = cKDTree(rows)
    extra = len(tree.query_ball_point(z, r=0.0)) if exclude_self else 0
    k_query = min(rows.shape[0], k + extra)
    distances, indices = tree.query(z, k=k_query)
    distances = np.atleast_1d(distances)
    indices = np.atleast_1d(indices)
    if exclude_self:
        keep = distances > 0
        distances, indices = distances[keep], indices[keep]
    return distances[:k], indices[:k]


def lid_estimate(data, z_e: np.ndarray, k: int) -> float:
    """
    Maximum-likelihood local intrinsic dimensionality at z_e.

    LID = -(1/k * sum_i ln(r_i / r_k))^-1 over the k nearest non-zero
    neighbour distances r_1 <= ... <= r_k.

    Raises:
        EstimationError: k < 2, fewer than k usable neighbours, or all distances equal
    """
    if k < 2:
        raise EstimationError(f'LID needs k >= 2, got {k}')
    rows = _rows_of(data)
    distances, _ = nearest_neighbours(rows, z_e, k, exclude_self=True)
    if distances.size < k:
        raise EstimationError(f'LID needs {k} neighbours at positive distance, found {distances.size}')
    mean_log_ratio = float(np.mean(np.log(distances / distances[-1])))
    if mean_log_ratio == 0.0:
        raise EstimationError('LID is undefined: all neighbour distances are equal')
    return -1.0 / mean_log_ratio


@dataclass(frozen=True)
class LocalEmbedding:
    """Affine subspace mean + span(components); components are orthonormal columns"""
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def out_dim(self) -> int:
        return self.components.shape[1]

    def project(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) @ self.components

    def reconstruct(self, p) -> np.ndarray:
        return self.mean + np.asarray(p, dtype=float) @ self.components.T

    def residual(self, x) -> np.ndarray:
        """Distance of each point to the affine subspace"""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.linalg.norm(x - self.reconstruct(self.project(x)), axis=1)


def local_pca(data, z_e: np.ndarray, k_pca: int, out_dim: int) -> LocalEmbedding:
    """
    PCA fitted on the k_pca nearest training neighbours of z_e.

    Components are ordered by decreasing variance; each is signed so its
    largest-magnitude entry is positive. When out_dim exceeds the numerical
    rank of the neighbourhood, it is reduced with a warning.

    Raises:
        ConfigError: out_dim < 1 or out_dim > min(k_pca, d)
    """
    rows = _rows_of(data)
    d = rows.shape[1]
    if out_dim < 1 or out_dim > min(k_pca, d):
        raise ConfigError(f'PCA output dimension {out_dim} must lie in [1, min(k_pca={k_pca}, d={d})]')
    _, indices = nearest_neighbours(rows, z_e, k_pca)
    neighbours = rows[np.sort(indices)]
    mean = neighbours.mean(axis=0)
    centered = neighbours - mean
    _, singular, vt = linalg.svd(centered, full_matrices=False)

    tol = singular[0] * max(centered.shape) * np.finfo(float).eps if singular.size else 0.0
    rank = int(np.sum(singular > tol))
    if out_dim > rank:
        reduced = max(1, rank)
        print(f"⚠️  Local PCA: requested dimension {out_dim} exceeds neighbourhood rank {rank}, using {reduced}")
        out_dim = reduced

    components = vt[:out_dim].T.copy()
    for j in range(out_dim):
        if components[np.argmax(np.abs(components[:, j])), j] < 0:
            components[:, j] = -components[:, j]
    variance = singular[:out_dim] ** 2 / max(neighbours.shape[0] - 1, 1)
    return LocalEmbedding(mean=mean, components=components, explained_variance=variance)
