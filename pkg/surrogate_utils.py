"""
Surrogate Utilities Module
Handles interpretable model fitting on a neighbourhood: weighted ridge and a weighted CART tree
"""
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.linear_model import Ridge

from error_utils import ConfigError, DimensionError, SingularSystemError

# Smallest-to-largest eigenvalue ratio of the Gram matrix below which a ridge system is singular
SINGULAR_EIGEN_RATIO = 1e-10


def _weights_for(weights: Optional[np.ndarray], m: int) -> np.ndarray:
    if weights is None:
        return np.ones(m)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != m:
        raise DimensionError(f'Got {w.shape[0]} weights for {m} points')
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ConfigError('Surrogate weights must be finite and non-negative')
    return w


@dataclass(frozen=True)
class LinearSurrogate:
    coefficients: np.ndarray
    intercept: float

    def predict(self, points) -> np.ndarray:
        return np.atleast_2d(np.asarray(points, dtype=float)) @ self.coefficients + self.intercept

    def to_dict(self) -> Dict[str, Any]:
        return {'coefficients': [float(c) for c in self.coefficients], 'intercept': float(self.intercept)}


def _check_conditioning(x: np.ndarray, w: np.ndarray, lam: float):
    """Reject a penalised weighted Gram matrix whose eigenvalue spread marks it singular"""
    centred = x - w @ x
    gram = centred.T @ (centred * w[:, None]) + lam * np.eye(x.shape[1])
    eigenvalues = np.linalg.eigvalsh(gram)
    if eigenvalues.max() <= 0 or eigenvalues.min() <= SINGULAR_EIGEN_RATIO * eigenvalues.max():
        raise SingularSystemError('Ridge system is singular; increase the ridge penalty')


def fit_weighted_ridge(points, targets, weights: Optional[np.ndarray] = None,
                       lam: float = 1e-6) -> LinearSurrogate:
    """
    Weighted ridge regression with an unpenalised intercept.

    Minimises sum_i w_i (y_i - beta.x_i - b)^2 + lam * |beta|^2 with the
    weights normalised to sum 1, so rescaling every weight leaves the fit
    unchanged. Zero-weight points are dropped before solving.

    Args:
        points: m x d design matrix
        targets: m regression targets
        weights: Optional m non-negative weights (uniform when omitted)
        lam: Ridge penalty (>= 0)

    Returns:
        LinearSurrogate

    Raises:
        SingularSystemError: The normal equations are singular (e.g. lam = 0 on collinear data)
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    y = np.asarray(targets, dtype=float).reshape(-1)
    m = x.shape[0]
    if m == 0:
        raise ConfigError('Cannot fit a surrogate on an empty neighbourhood')
    if y.shape[0] != m:
        raise DimensionError(f'Got {y.shape[0]} targets for {m} points')
    if lam < 0:
        raise ConfigError(f'Ridge penalty must be >= 0, got {lam}')
    w = _weights_for(weights, m)

    keep = w > 0
    if not np.any(keep):
        raise ConfigError('Surrogate weights are all zero')
    x, y, w = x[keep], y[keep], w[keep]
    w = w / w.sum()
    _check_conditioning(x, w, lam)

    model = Ridge(alpha=lam, fit_intercept=True, solver='cholesky')
    model.fit(x, y, sample_weight=w)
    beta = np.asarray(model.coef_, dtype=float).reshape(-1)
    intercept = float(model.intercept_)
    if not np.all(np.isfinite(beta)) or not np.isfinite(intercept):
        raise SingularSystemError('Ridge solve produced non-finite coefficients')
    return LinearSurrogate(coefficients=beta, intercept=intercept)


def attribution_of(surrogate: LinearSurrogate) -> Tuple[float, ...]:
    """The coefficients, unnormalised"""
    return tuple(float(c) for c in surrogate.coefficients)


def _gini_mass(total: np.ndarray, positive: np.ndarray) -> np.ndarray:
    """Weighted Gini impurity times node weight: 2 * W1 * W0 / W"""
    total = np.asarray(total, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        mass = 2.0 * positive * (total - positive) / total
    return np.where(total > 0, mass, 0.0)


@dataclass(frozen=True)
class TreeSurrogate:
    """Binary classification tree; internal nodes send x[feature] <= threshold to the left"""
    root: Dict[str, Any]
    max_depth: int
    n_features: int

    def _predict_node(self, node: Dict[str, Any], x: np.ndarray, out: np.ndarray, idx: np.ndarray):
        if 'label' in node:
            out[idx] = node['label']
            return
        go_left = x[idx, node['feature']] <= node['threshold']
        self._predict_node(node['left'], x, out, idx[go_left])
        self._predict_node(node['right'], x, out, idx[~go_left])

    def predict(self, points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        if x.shape[1] != self.n_features:
            raise DimensionError(f'Tree expects {self.n_features} features, got {x.shape[1]}')
        out = np.zeros(x.shape[0], dtype=int)
        self._predict_node(self.root, x, out, np.arange(x.shape[0]))
        return out

    def depth(self) -> int:
        def walk(node):
            return 0 if 'label' in node else 1 + max(walk(node['left']), walk(node['right']))
        return walk(self.root)

    def leaf_count(self) -> int:
        def walk(node):
            return 1 if 'label' in node else walk(node['left']) + walk(node['right'])
        return walk(self.root)

    def rules(self, feature_names: Optional[Sequence[str]] = None) -> str:
        """Indented rule listing, one condition or leaf per line"""
        names = list(feature_names) if feature_names is not None else [f'x{j}' for j in range(self.n_features)]
        lines: List[str] = []

        def walk(node, indent):
            pad = '  ' * indent
            if 'label' in node:
                lines.append(f"{pad}-> class {node['label']} (weight {node['weight']:.6g})")
                return
            name = names[node['feature']]
            lines.append(f"{pad}if {name} <= {node['threshold']:.6g}:")
            walk(node['left'], indent + 1)
            lines.append(f"{pad}else:  # {name} > {node['threshold']:.6g}")
            walk(node['right'], indent + 1)

        walk(self.root, 0)
        return '\n'.join(lines) + '\n'

    def to_dict(self, feature_names: Optional[Sequence[str]] = None) -> Dict[str, Any]:
        return {'max_depth': self.max_depth, 'depth': self.depth(),
                'root': self.root, 'rules': self.rules(feature_names)}


def _best_split(x: np.ndarray, y: np.ndarray, w: np.ndarray, tolerance: float,
                min_child_weight: float) -> Optional[Tuple[int, float, float]]:
    """
    Best (feature, threshold, impurity decrease) over midpoints of sorted distinct values.

    A later candidate replaces the incumbent only when strictly better by more
    than tolerance, so ties go to the lowest feature, then the lowest threshold.
    """
    total = w.sum()
    positive = float(w @ y)
    parent = float(_gini_mass(np.array([total]), np.array([positive]))[0])
    best = None
    for j in range(x.shape[1]):
        order = np.argsort(x[:, j], kind='stable')
        xs, ws, ys = x[order, j], w[order], y[order]
        cut = np.flatnonzero(xs[:-1] < xs[1:])
        if cut.size == 0:
            continue
        left_w = np.cumsum(ws)[cut]
        left_pos = np.cumsum(ws * ys)[cut]
        right_w = total - left_w
        right_pos = positive - left_pos
        decrease = parent - _gini_mass(left_w, left_pos) - _gini_mass(right_w, right_pos)
        allowed = (left_w >= min_child_weight) & (right_w >= min_child_weight)
        for k in np.flatnonzero(allowed):
            if best is not None and decrease[k] <= best[2] + tolerance:
                continue
            lo, hi = xs[cut[k]], xs[cut[k] + 1]
            threshold = (lo + hi) / 2.0
            if not lo <= threshold < hi:
                threshold = lo
            best = (j, float(threshold), float(decrease[k]))
    if best is None or best[2] <= tolerance:
        return None
    return best


def fit_tree(points, labels, weights: Optional[np.ndarray] = None, max_depth: int = 3,
             min_leaf_weight: float = 0.01) -> TreeSurrogate:
    """
    Weighted CART classifier.

    Splits greedily on the largest weighted Gini impurity decrease; stops at
    max_depth, on pure nodes, or when no split leaves both children with at
    least min_leaf_weight (a fraction of the total weight). Leaves predict the
    heavier class, class 0 on ties.

    Args:
        points: m x d matrix
        labels: m labels in {0, 1}
        weights: Optional non-negative weights (uniform when omitted)
        max_depth: Maximum depth (>= 1)
        min_leaf_weight: Minimum child weight as a fraction of the root weight

    Returns:
        TreeSurrogate
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    y = np.asarray(labels).astype(int).reshape(-1)
    m, d = x.shape
    if m == 0:
        raise ConfigError('Cannot fit a tree on an empty neighbourhood')
    if y.shape[0] != m:
        raise DimensionError(f'Got {y.shape[0]} labels for {m} points')
    if not np.all(np.isin(y, (0, 1))):
        raise ConfigError('Tree labels must be 0 or 1')
    if not isinstance(max_depth, int) or max_depth < 1:
        raise ConfigError(f'max_depth must be an integer >= 1, got {max_depth}')
    if not 0.0 <= min_leaf_weight < 1.0:
        raise ConfigError(f'min_leaf_weight must lie in [0, 1), got {min_leaf_weight}')
    w = _weights_for(weights, m)
    root_weight = float(w.sum())
    if root_weight <= 0:
        raise ConfigError('Tree weights are all zero')
    min_child_weight = min_leaf_weight * root_weight
    tolerance = 1e-12 * root_weight

    def leaf(idx: np.ndarray) -> Dict[str, Any]:
        positive = float(w[idx] @ y[idx])
        total = float(w[idx].sum())
        return {'label': int(positive > total - positive), 'weight': total / root_weight}

    def grow(idx: np.ndarray, depth: int) -> Dict[str, Any]:
        node_labels = y[idx]
        if depth >= max_depth or np.all(node_labels == node_labels[0]):
            return leaf(idx)
        split = _best_split(x[idx], node_labels, w[idx], tolerance, min_child_weight)
        if split is None:
            return leaf(idx)
        feature, threshold, _ = split
        go_left = x[idx, feature] <= threshold
        return {'feature': feature, 'threshold': threshold,
                'left': grow(idx[go_left], depth + 1),
                'right': grow(idx[~go_left], depth + 1)}

    return TreeSurrogate(root=grow(np.arange(m), 0), max_depth=max_depth, n_features=d)
