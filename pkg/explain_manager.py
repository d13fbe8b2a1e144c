"""
Explain Manager Module
Handles the two-step explanation pipeline: neighbourhood extraction, then surrogate fitting
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import psutil

from config_utils import RunConfig, strategy_seed, surrogate_kind_for
from domain_types import STRATEGY_IDS, Dataset, Explanation, Neighbourhood, as_instance
from error_utils import ConfigError, DimensionError, safe_log_error
from neighbourhood_utils import generate_neighbourhood
from shapley_utils import ShapleyProblem, build_background, exact_shapley, kernelshap_solve
from surrogate_utils import attribution_of, fit_tree, fit_weighted_ridge

# Coalitions sampled by the shapley surrogate when d exceeds the enumeration cap
SAMPLED_COALITIONS_ABOVE_CAP = 2048


def fidelity(predictions, labels, weights: Optional[np.ndarray] = None) -> float:
    """(Weighted) fraction of points where the surrogate agrees with the black box"""
    predictions = np.asarray(predictions).astype(int).reshape(-1)
    labels = np.asarray(labels).astype(int).reshape(-1)
    if predictions.shape[0] != labels.shape[0]:
        raise DimensionError('Predictions and labels disagree in length')
    if predictions.shape[0] == 0:
        raise ConfigError('Fidelity needs at least one point')
    agree = (predictions == labels).astype(float)
    if weights is None:
        return float(agree.mean())
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if weights.shape[0] != labels.shape[0]:
        raise DimensionError(f'Got {weights.shape[0]} weights for {labels.shape[0]} points')
    total = float(weights.sum())
    if not total > 0:
        raise ConfigError(f'Fidelity weights must have a positive sum, got {total}')
    return float(np.clip(weights @ agree / total, 0.0, 1.0))


@dataclass(frozen=True)
class ExplainResult:
    explanation: Explanation
    neighbourhood: Optional[Neighbourhood]
    problem: Optional[ShapleyProblem] = None


def _shapley_fidelity(problem: ShapleyProblem, phi: np.ndarray) -> float:
    """Agreement of base + mask.phi with the coalition values, at the 0.5 threshold, kernel-weighted"""
    if problem.masks.shape[0] == 0:
        return 1.0
    predicted = problem.base_value + problem.masks.astype(float) @ phi
    return fidelity(predicted >= 0.5, problem.targets >= 0.5, problem.weights)


def explain(model, data: Dataset, z_e, method: str, run_config: RunConfig, seed: Optional[int] = None,
            feature_names: Optional[Sequence[str]] = None) -> ExplainResult:
    """
    Explain the black box at z_e with one strategy and its surrogate.

    Args:
        model: Black box
        data: Training data
        z_e: Instance to explain
        method: Neighbourhood strategy id
        run_config: Effective RunConfig (surrogate kind, per-strategy settings)
        seed: Strategy seed (derived from run_config.seed when omitted)
        feature_names: Names used in the tree rule listing

    Returns:
        ExplainResult with the Explanation, the neighbourhood and the Shapley problem when one was solved
    """
    if method not in STRATEGY_IDS:
        raise ConfigError(f"Unknown method '{method}'. Valid methods: {', '.join(STRATEGY_IDS)}")
    z_e = as_instance(z_e, data.d)
    if seed is None:
        seed = strategy_seed(run_config.seed, method)
    kind = surrogate_kind_for(method, run_config.surrogate)
    shap_cfg = run_config.kernelshap
    above_cap = data.d > shap_cfg.enumeration_cap

    background = None
    if method == 'kernelshap' or kind == 'shapley':
        background_seed = seed if method == 'kernelshap' else strategy_seed(run_config.seed, 'kernelshap')
        background = build_background(data, shap_cfg, background_seed)

    nb = None
    if not (method == 'kernelshap' and kind == 'shapley' and above_cap):
        nb = generate_neighbourhood(method, model, data, z_e, run_config, seed, background)
    flags = tuple(nb.flags) if nb is not None else ()
    digest = run_config.digest()
    surrogate_cfg = run_config.surrogate

    if kind == 'ridge':
        linear = fit_weighted_ridge(nb.points, nb.bb_probas, nb.weights, surrogate_cfg.ridge_lambda)
        score = fidelity(linear.predict(nb.points) >= 0.5, nb.bb_labels, nb.weights)
        explanation = Explanation(method=method, surrogate=kind, attribution=attribution_of(linear), tree=None,
                                  base_value=float(linear.intercept), fidelity=score, seed=seed,
                                  config_digest=digest, flags=flags)
        return ExplainResult(explanation=explanation, neighbourhood=nb)

    if kind == 'tree':
        tree = fit_tree(nb.points, nb.bb_labels, nb.weights, surrogate_cfg.max_depth,
                        surrogate_cfg.min_leaf_weight)
        score = fidelity(tree.predict(nb.points), nb.bb_labels, nb.weights)
        explanation = Explanation(method=method, surrogate=kind, attribution=None,
                                  tree=tree.to_dict(feature_names), base_value=None, fidelity=score,
                                  seed=seed, config_digest=digest, flags=flags)
        return ExplainResult(explanation=explanation, neighbourhood=nb)

    sample_count = shap_cfg.sample_count
    if sample_count is None and above_cap:
        sample_count = max(SAMPLED_COALITIONS_ABOVE_CAP, data.d)
    if sample_count is not None:
        flags = flags + ('sampled_coalitions',)
    phi, base, problem = kernelshap_solve(model, z_e, background, sample_count=sample_count, seed=seed,
                                          enumeration_cap=shap_cfg.enumeration_cap, return_problem=True)
    explanation = Explanation(method=method, surrogate=kind, attribution=tuple(float(v) for v in phi),
                              tree=None, base_value=float(base), fidelity=_shapley_fidelity(problem, phi),
                              seed=seed, config_digest=digest, flags=flags)
    return ExplainResult(explanation=explanation, neighbourhood=nb, problem=problem)


def explain_exact(model, data: Dataset, z_e, run_config: RunConfig) -> Explanation:
    """Explanation document carrying the brute-force Shapley values"""
    z_e = as_instance(z_e, data.d)
    seed = strategy_seed(run_config.seed, 'kernelshap')
    background = build_background(data, run_config.kernelshap, seed)
    phi, base = exact_shapley(model, z_e, background, run_config.kernelshap.enumeration_cap)
    return Explanation(method='shapley_exact', surrogate='exact', attribution=tuple(float(v) for v in phi),
                       tree=None, base_value=float(base), fidelity=1.0, seed=seed,
                       config_digest=run_config.digest())


def default_worker_count(task_count: int) -> int:
    """One worker per physical core, never more than there are tasks"""
    cores = psutil.cpu_count(logical=False) or 1
    return max(1, min(task_count, cores))


class ExplainManager:
    """Manages explanation runs for one black box, training set and configuration"""

    def __init__(self, model, data: Dataset, run_config: RunConfig,
                 feature_names: Optional[Sequence[str]] = None):
        """
        Initialize ExplainManager

        Args:
            model: Black box
            data: Training data
            run_config: Effective RunConfig
            feature_names: Feature names for rule listings (default: the dataset's)
        """
        self.model = model
        self.data = data
        self.run_config = run_config
        self.feature_names = list(feature_names) if feature_names is not None else list(data.feature_names)

    def instance_at(self, index: int) -> np.ndarray:
        if not 0 <= index < self.data.n:
            raise ConfigError(f'Index {index} out of range for {self.data.n} rows')
        return self.data.rows[index].copy()

    def explain(self, z_e, method: str) -> Dict[str, Any]:
        """
        Explain z_e with one method

        Returns:
            Dict with success flag and the ExplainResult, or error
        """
        try:
            result = explain(self.model, self.data, z_e, method, self.run_config,
                             feature_names=self.feature_names)
            return {'success': True, 'result': result}
        except Exception as e:
            safe_log_error(e, context=f"explain ({method})")
            return {'error': str(e)}

    def compare(self, z_e, methods: List[str], max_workers: Optional[int] = None) -> Dict[str, Any]:
        """
        Explain the same instance with several methods, concurrently.

        Results come back in the order of methods regardless of completion order.

        Args:
            z_e: Shared instance to explain
            methods: Strategy ids
            max_workers: Thread count (default: physical cores, capped by len(methods))

        Returns:
            Dict with success flag and the ordered results, or error
        """
        unknown = [m for m in methods if m not in STRATEGY_IDS]
        if unknown:
            return {'error': f"Unknown method '{unknown[0]}'. Valid methods: {', '.join(STRATEGY_IDS)}"}
        if not methods:
            return {'error': 'No methods to compare'}

        workers = max_workers or default_worker_count(len(methods))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(explain, self.model, self.data, z_e, method, self.run_config,
                                   None, self.feature_names) for method in methods]
            results = []
            for method, future in zip(methods, futures):
                try:
                    results.append(future.result())
                except Exception as e:
                    safe_log_error(e, context=f"compare ({method})")
                    return {'error': f'{method}: {e}'}
        return {'success': True, 'results': results}

    def shapley_exact(self, z_e) -> Dict[str, Any]:
        """
        Brute-force Shapley values at z_e

        Returns:
            Dict with success flag and the Explanation, or error
        """
        try:
            return {'success': True, 'explanation': explain_exact(self.model, self.data, z_e, self.run_config)}
        except Exception as e:
            safe_log_error(e, context="shapley_exact")
            return {'error': str(e)}
