"""
Shapley Utilities Module
Handles KernelSHAP neighbourhoods, constrained kernel regression, the exact Shapley oracle and backgrounds
"""
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist
from scipy.special import comb

from config_utils import KernelShapConfig
from domain_types import Neighbourhood, label_neighbourhood
from error_utils import (ConfigError, DimensionError, EnumerationCapError,
                         EstimationError, SingularSystemError)

DEFAULT_ENUMERATION_CAP = 12


def shapley_kernel_weight(d: int, s: int) -> float:
    """(d - 1) / (C(d, s) * s * (d - s)) for 1 <= s <= d - 1"""
    if d < 2 or s < 1 or s > d - 1:
        raise ConfigError(f'Shapley kernel weight is infinite or undefined for d={d}, s={s}')
    return (d - 1) / (comb(d, s, exact=True) * s * (d - s))


@dataclass(frozen=True)
class Background:
    """Rows supplying values for unclamped features"""
    rows: np.ndarray
    counts: Optional[np.ndarray] = None
    wcss_history: Tuple[float, ...] = ()

    @property
    def n(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class ShapleyProblem:
    """Coalition design matrix, kernel weights and coalition values"""
    masks: np.ndarray
    weights: np.ndarray
    targets: np.ndarray
    base_value: float
    full_value: float

    def to_frame_rows(self) -> List[List[float]]:
        return [list(m.astype(int)) + [float(w), float(y)]
                for m, w, y in zip(self.masks, self.weights, self.targets)]


def all_masks(d: int) -> np.ndarray:
    """All 2^d coalitions as boolean rows; row q has feature j set iff bit j of q is set"""
    codes = np.arange(2 ** d)
    return ((codes[:, None] >> np.arange(d)) & 1).astype(bool)


def proper_masks(d: int) -> np.ndarray:
    """All coalitions except the empty and the full one"""
    return all_masks(d)[1:-1]


def hybrid_points(z_e: np.ndarray, mask: np.ndarray, background: np.ndarray) -> np.ndarray:
    """Background rows with the masked coordinates clamped to z_e"""
    hybrids = np.array(background, dtype=float, copy=True)
    hybrids[:, mask] = z_e[mask]
    return hybrids


def coalition_value(model, z_e: np.ndarray, mask: np.ndarray, background) -> float:
    """
    Independence approximation of E[f(X) | X_Q = z_e,Q]:
    mean predict_proba over background rows with Q clamped to z_e.
    """
    rows = getattr(background, 'rows', background)
    if rows.shape[0] == 0:
        raise ConfigError('Coalition values need a non-empty background')
    mask = np.asarray(mask, dtype=bool)
    probas = np.asarray(model.predict_proba(hybrid_points(z_e, mask, rows)), dtype=float).reshape(-1)
    return float(np.mean(probas))


def _check_cap(d: int, cap: int):
    if d > cap:
        raise EnumerationCapError(f'd = {d} exceeds the enumeration cap {cap}; use sampled coalitions')


def kernelshap_neighbourhood(model, data, z_e: np.ndarray, background: Optional[Background] = None,
                             enumeration_cap: int = DEFAULT_ENUMERATION_CAP, seed: int = 0) -> Neighbourhood:
    """
    Every (background row, proper non-empty subset S) hybrid, weighted by the Shapley kernel of |S|.

    Size is N * (2^d - 2); masks record which coordinates came from z_e.
    """
    d = z_e.shape[0]
    if d < 2:
        raise DimensionError('KernelSHAP neighbourhoods need d >= 2')
    _check_cap(d, enumeration_cap)
    rows = background.rows if background is not None else data.rows

    masks = proper_masks(d)
    sizes = masks.sum(axis=1)
    points = np.vstack([hybrid_points(z_e, mask, rows) for mask in masks])
    point_masks = np.repeat(masks, rows.shape[0], axis=0)
    weights = np.repeat([shapley_kernel_weight(d, int(s)) for s in sizes], rows.shape[0])
    return label_neighbourhood(model, points, 'kernelshap', seed, weights=weights, masks=point_masks)


def sample_coalitions(d: int, m: int, seed: int) -> np.ndarray:
    """
    m distinct proper coalitions: size drawn with probability proportional to its
    total kernel weight, members uniform within the size, without replacement.
    """
    total = 2 ** d - 2 if d < 63 else None
    if total is not None and m >= total:
        return proper_masks(d)
    sizes = np.arange(1, d)
    size_probs = np.array([1.0 / (s * (d - s)) for s in sizes])
    size_probs /= size_probs.sum()

    rng = np.random.default_rng(seed)
    seen = set()
    masks = []
    attempts = 0
    while len(masks) < m and attempts < 100 * m:
        attempts += 1
        s = int(rng.choice(sizes, p=size_probs))
        members = rng.choice(d, size=s, replace=False)
        mask = np.zeros(d, dtype=bool)
        mask[members] = True
        key = mask.tobytes()
        if key not in seen:
            seen.add(key)
            masks.append(mask)
    if len(masks) < m:
        print(f"⚠️  KernelSHAP: only {len(masks)} distinct coalitions found for m = {m}")
    return np.array(masks)


def build_problem(model, z_e: np.ndarray, background, masks: np.ndarray) -> ShapleyProblem:
    d = z_e.shape[0]
    targets = np.array([coalition_value(model, z_e, mask, background) for mask in masks])
    weights = np.array([shapley_kernel_weight(d, int(s)) for s in masks.sum(axis=1)])
    base = coalition_value(model, z_e, np.zeros(d, dtype=bool), background)
    full = coalition_value(model, z_e, np.ones(d, dtype=bool), background)
    return ShapleyProblem(masks=masks, weights=weights, targets=targets, base_value=base, full_value=full)


def solve_problem(problem: ShapleyProblem) -> np.ndarray:
    """
    Weighted least squares with sum(phi) = full - base enforced exactly.

    phi_d is eliminated as total - sum_{i<d} phi_i; the reduced normal
    equations are solved by Cholesky factorisation.
    """
    z = problem.masks.astype(float)
    d = z.shape[1]
    total = problem.full_value - problem.base_value
    reduced = z[:, :-1] - z[:, [-1]]
    shifted = problem.targets - problem.base_value - z[:, -1] * total
    weighted = reduced * problem.weights[:, None]
    lhs = reduced.T @ weighted
    rhs = weighted.T @ shifted
    try:
        factor = linalg.cho_factor(lhs)
        head = linalg.cho_solve(factor, rhs)
    except linalg.LinAlgError:
        raise SingularSystemError('KernelSHAP reduced system is singular; increase the number of coalitions')
    if not np.all(np.isfinite(head)):
        raise SingularSystemError('KernelSHAP solve produced non-finite values')
    return np.append(head, total - head.sum()) if d > 1 else np.array([total])


def kernelshap_solve(model, z_e: np.ndarray, background, sample_count: Optional[int] = None,
                     seed: int = 0, enumeration_cap: int = DEFAULT_ENUMERATION_CAP,
                     return_problem: bool = False):
    """
    Shapley values from the constrained Shapley-kernel regression.

    Args:
        model: Black box
        z_e: Instance to explain
        background: Background (or raw rows)
        sample_count: None for full enumeration, else number m >= d of sampled coalitions
        seed: Seed for coalition sampling
        enumeration_cap: Largest d allowed for full enumeration
        return_problem: Also return the ShapleyProblem

    Returns:
        (phi, base_value) or (phi, base_value, problem)
    """
    d = z_e.shape[0]
    if d == 1:
        base = coalition_value(model, z_e, np.zeros(1, dtype=bool), background)
        full = coalition_value(model, z_e, np.ones(1, dtype=bool), background)
        phi = np.array([full - base])
        problem = ShapleyProblem(masks=np.zeros((0, 1), dtype=bool), weights=np.zeros(0),
                                 targets=np.zeros(0), base_value=base, full_value=full)
        return (phi, base, problem) if return_problem else (phi, base)

    if sample_count is None:
        _check_cap(d, enumeration_cap)
        masks = proper_masks(d)
    else:
        if sample_count < d:
            raise ConfigError(f'Sampled KernelSHAP needs m >= d (m = {sample_count}, d = {d})')
        masks = sample_coalitions(d, sample_count, seed)

    problem = build_problem(model, z_e, background, masks)
    phi = solve_problem(problem)
    return (phi, problem.base_value, problem) if return_problem else (phi, problem.base_value)


def exact_shapley(model, z_e: np.ndarray, background,
                  enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> Tuple[np.ndarray, float]:
    """
    Brute-force Shapley values over all 2^d coalitions.

    phi_i = sum_{Q not containing i} |Q|! (d - |Q| - 1)! / d! * (v(Q + i) - v(Q)).
    """
    d = z_e.shape[0]
    _check_cap(d, enumeration_cap)
    masks = all_masks(d)
    values = np.array([coalition_value(model, z_e, mask, background) for mask in masks])
    sizes = masks.sum(axis=1)
    factorials = [math.factorial(k) for k in range(d + 1)]
    phi = np.zeros(d)
    for i in range(d):
        bit = 1 << i
        for code in range(2 ** d):
            if code & bit:
                continue
            s = int(sizes[code])
            weight = factorials[s] * factorials[d - s - 1] / factorials[d]
            phi[i] += weight * (values[code | bit] - values[code])
    return phi, float(values[0])


def kmeans_background(data, k: int, iterations: int, seed: int) -> Background:
    """
    Lloyd's k-means from k distinct seeded rows; empty clusters keep their centroid.

    Returns:
        Background with the centroids, cluster sizes and per-iteration WCSS
    """
    rows = np.asarray(getattr(data, 'rows', data), dtype=float)
    n = rows.shape[0]
    if k < 1 or k > n:
        raise EstimationError(f'k-means needs 1 <= k <= n (k = {k}, n = {n})')
    rng = np.random.default_rng(seed)
    centroids = rows[np.sort(rng.choice(n, size=k, replace=False))].copy()

    history = []
    assignment = None
    for _ in range(iterations):
        distances = cdist(rows, centroids, 'sqeuclidean')
        assignment = np.argmin(distances, axis=1)
        history.append(float(distances[np.arange(n), assignment].sum()))
        updated = centroids.copy()
        for j in range(k):
            members = rows[assignment == j]
            if members.shape[0]:
                updated[j] = members.mean(axis=0)
        if np.array_equal(updated, centroids):
            break
        centroids = updated

    distances = cdist(rows, centroids, 'sqeuclidean')
    assignment = np.argmin(distances, axis=1)
    history.append(float(distances[np.arange(n), assignment].sum()))
    counts = np.bincount(assignment, minlength=k)
    return Background(rows=centroids, counts=counts, wcss_history=tuple(history))


def build_background(data, cfg: KernelShapConfig, seed: int) -> Background:
    """All training rows, or k-means centroids when background_size is set"""
    if cfg.background_size is None or cfg.background_size >= data.n:
        return Background(rows=data.rows)
    return kmeans_background(data, cfg.background_size, cfg.kmeans_iterations, seed)
