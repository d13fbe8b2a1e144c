"""
Neighbourhood Utilities Module
Handles LIME and LEAP sampling, strategy dispatch, neighbourhood summaries and export
"""
import json
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from config_utils import (AUTO, DEFAULT_SURROGATES, LeapConfig, LimeConfig, RunConfig,
                          ensure_valid, strategy_seed, validate_leap_config, validate_lime_config)
from counterfactual_utils import gsls_neighbourhood, resolve_gsls_config
from domain_types import STRATEGY_IDS, TOOL_VERSION, Dataset, Neighbourhood, label_neighbourhood
from embedding_utils import lid_estimate, local_pca
from error_utils import ConfigError, DimensionError
from lore_utils import lore_neighbourhood
from pattern_utils import palex_neighbourhood
from shapley_utils import Background, build_background, kernelshap_neighbourhood

# How each strategy defines locality, one row per strategy
STRATEGY_TABLE: List[Dict[str, str]] = [
    {'strategy': 'lime', 'sampling': 'Gaussian around the instance, per-feature scale',
     'weighting': 'exp(-|z - z_e|^2 / gamma)', 'locality': 'distance to the instance'},
    {'strategy': 'gsls', 'sampling': 'uniform in a ball around the closest counterfactual',
     'weighting': 'none', 'locality': 'the decision boundary nearest to the instance'},
    {'strategy': 'lore', 'sampling': 'genetic search, same-class and other-class halves',
     'weighting': 'none', 'locality': 'mixed distance plus black-box agreement'},
    {'strategy': 'leap', 'sampling': 'Gaussian in a local PCA subspace of LID dimension',
     'weighting': 'exp(-|p - p_e|^2 / gamma) in the subspace', 'locality': 'the local data manifold'},
    {'strategy': 'kernelshap', 'sampling': 'every feature subset of the instance over background rows',
     'weighting': 'Shapley kernel of the subset size', 'locality': 'feature coalitions'},
    {'strategy': 'palex', 'sampling': 'random feature subset of the instance over a training row',
     'weighting': 'exp(-frequent-pattern distance)', 'locality': 'shared frequent patterns'},
]


def strategy_rows() -> List[Dict[str, str]]:
    """STRATEGY_TABLE with each strategy's default surrogate appended"""
    return [dict(row, default_surrogate=DEFAULT_SURROGATES[row['strategy']]) for row in STRATEGY_TABLE]


def resolve_gamma(gamma, dim: int) -> float:
    """'auto' becomes (sqrt(dim))^0.75"""
    if gamma == AUTO:
        return float(np.sqrt(dim) ** 0.75)
    if not isinstance(gamma, (int, float)) or gamma <= 0:
        raise ConfigError(f"gamma must be 'auto' or > 0, got {gamma}")
    return float(gamma)


def lime_weights(points, z_e: np.ndarray, gamma) -> np.ndarray:
    """
    w_i = exp(-|z_i - z_e|^2 / gamma); gamma itself, not its square, divides the distance.

    Args:
        points: m x d sampled points
        z_e: Instance to explain
        gamma: Kernel width (> 0) or 'auto'

    Returns:
        m weights in (0, 1]
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != z_e.shape[0]:
        raise DimensionError(f'Points have {points.shape[1]} features, instance has {z_e.shape[0]}')
    width = resolve_gamma(gamma, z_e.shape[0])
    squared = np.sum((points - z_e) ** 2, axis=1)
    if not np.all(np.isfinite(squared)):
        raise ConfigError('LIME weights: non-finite distances')
    return np.exp(-squared / width)


def lime_neighbourhood(model, data: Dataset, z_e: np.ndarray, cfg: LimeConfig, seed: int) -> Neighbourhood:
    """Gaussian samples N(z_e, diag(sigma^2)) with LIME weights"""
    d = z_e.shape[0]
    ensure_valid(validate_lime_config(cfg, d))
    if cfg.sigma == AUTO:
        if data is None or data.n == 0:
            raise ConfigError("LIME sigma 'auto' needs training data")
        sigma = data.stds()
        constant = np.flatnonzero(sigma == 0)
        if constant.size:
            raise ConfigError(f'LIME sigma auto: feature(s) {constant.tolist()} have zero std (constant column)')
    else:
        sigma = np.asarray(cfg.sigma, dtype=float)
    rng = np.random.default_rng(seed)
    points = z_e + rng.normal(size=(cfg.sample_count, d)) * sigma
    return label_neighbourhood(model, points, 'lime', seed, weights=lime_weights(points, z_e, cfg.gamma))


def leap_neighbourhood(model, data: Dataset, z_e: np.ndarray, cfg: LeapConfig, seed: int) -> Neighbourhood:
    """
    LIME sampling inside a local PCA subspace whose dimension is the rounded LID.

    Points are drawn around the projected instance, weighted by their subspace
    distance to it, then mapped back to the feature space.
    """
    ensure_valid(validate_leap_config(cfg, data.n))
    d = data.d
    lid = lid_estimate(data, z_e, cfg.k_lid)
    k_pca = min(cfg.k_pca, data.n)
    out_dim = int(min(max(np.floor(lid + 0.5), 1), d, k_pca))
    embedding = local_pca(data, z_e, k_pca, out_dim)
    out_dim = embedding.out_dim

    center = embedding.project(z_e)
    if cfg.sigma == AUTO:
        sigma = np.sqrt(embedding.explained_variance)
        if np.any(sigma == 0):
            raise ConfigError('LEAP sigma auto: a projected component has zero spread')
    else:
        sigma = np.full(out_dim, float(cfg.sigma))
    rng = np.random.default_rng(seed)
    projected = center + rng.normal(size=(cfg.sample_count, out_dim)) * sigma
    width = resolve_gamma(cfg.gamma, out_dim)
    weights = np.exp(-np.sum((projected - center) ** 2, axis=1) / width)
    points = embedding.reconstruct(projected)
    return label_neighbourhood(model, points, 'leap', seed, weights=weights,
                               diagnostics={'lid': lid, 'out_dim': out_dim,
                                            'mean': embedding.mean.tolist(),
                                            'components': embedding.components.tolist()})


def generate_neighbourhood(method: str, model, data: Dataset, z_e: np.ndarray, run_config: RunConfig,
                           seed: Optional[int] = None,
                           background: Optional[Background] = None) -> Neighbourhood:
    """
    Build the neighbourhood of z_e with the named strategy.

    Args:
        method: One of lime, gsls, lore, leap, kernelshap, palex
        model: Black box
        data: Training data
        z_e: Instance to explain
        run_config: Effective RunConfig
        seed: Strategy seed (derived from run_config.seed when omitted)
        background: KernelSHAP background (built from the seed when omitted)

    Returns:
        Neighbourhood
    """
    if method not in STRATEGY_IDS:
        raise ConfigError(f"Unknown method '{method}'. Valid methods: {', '.join(STRATEGY_IDS)}")
    if z_e.shape[0] != data.d:
        raise DimensionError(f'Instance has {z_e.shape[0]} features, training data has {data.d}')
    if seed is None:
        seed = strategy_seed(run_config.seed, method)

    if method == 'lime':
        return lime_neighbourhood(model, data, z_e, run_config.lime, seed)
    if method == 'gsls':
        return gsls_neighbourhood(model, z_e, resolve_gsls_config(run_config.gsls, data), seed)
    if method == 'lore':
        return lore_neighbourhood(model, data, z_e, run_config.lore, seed)
    if method == 'leap':
        return leap_neighbourhood(model, data, z_e, run_config.leap, seed)
    if method == 'kernelshap':
        if background is None:
            background = build_background(data, run_config.kernelshap, seed)
        return kernelshap_neighbourhood(model, data, z_e, background,
                                        run_config.kernelshap.enumeration_cap, seed)
    return palex_neighbourhood(model, data, z_e, run_config.palex, seed)


def summarize_neighbourhood(nb: Neighbourhood, z_e: np.ndarray) -> Dict[str, Any]:
    """Size, class balance, distance to z_e and effective sample size of the weights"""
    distances = np.linalg.norm(nb.points - z_e, axis=1)
    if nb.weights is None:
        ess = float(nb.size)
    else:
        total = float(nb.weights.sum())
        squares = float(np.sum(nb.weights ** 2))
        ess = total * total / squares if squares > 0 else 0.0
    return {
        'strategy': nb.strategy_id,
        'size': nb.size,
        'class1_fraction': float(np.mean(nb.bb_labels)) if nb.size else 0.0,
        'weighted': nb.weights is not None,
        'mean_distance': float(distances.mean()) if nb.size else 0.0,
        'max_distance': float(distances.max()) if nb.size else 0.0,
        'effective_sample_size': ess,
        'flags': ';'.join(nb.flags),
    }


def neighbourhood_frame(nb: Neighbourhood, feature_names: Optional[List[str]] = None) -> pd.DataFrame:
    d = nb.points.shape[1]
    names = list(feature_names) if feature_names is not None else [f'x{j}' for j in range(d)]
    frame = pd.DataFrame(nb.points, columns=names)
    frame['weight'] = nb.weights if nb.weights is not None else np.nan
    frame['bb_label'] = nb.bb_labels.astype(int)
    return frame


def save_neighbourhood(nb: Neighbourhood, csv_path: str, meta_path: Optional[str] = None,
                       feature_names: Optional[List[str]] = None, config: Optional[Dict[str, Any]] = None,
                       config_digest: str = ''):
    """
    Write the neighbourhood as CSV (features, weight, bb_label) and an optional JSON sidecar.

    The weight column is empty for unweighted strategies.
    """
    neighbourhood_frame(nb, feature_names).to_csv(csv_path, index=False, na_rep='', lineterminator='\n')
    if meta_path is None:
        return
    meta = {
        'strategy': nb.strategy_id,
        'seed': nb.seed,
        'size': nb.size,
        'flags': list(nb.flags),
        'config': config or {},
        'config_digest': config_digest,
        'diagnostics': nb.diagnostics,
        'tool_version': TOOL_VERSION,
    }
    with open(meta_path, 'w') as f:
        f.write(json.dumps(meta, indent=2) + '\n')
