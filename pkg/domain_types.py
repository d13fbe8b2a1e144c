"""
Domain Types Module
Shared data types: instances, datasets, neighbourhoods and explanations
"""
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from error_utils import ConfigError, DataFormatError, DimensionError

TOOL_VERSION = '1.0.0'

STRATEGY_IDS = ('lime', 'gsls', 'lore', 'leap', 'kernelshap', 'palex')

CONTINUOUS = 'continuous'
CATEGORICAL = 'categorical'


def provenance(seed: Optional[int], config_digest: Optional[str]) -> Dict[str, Any]:
    """Seed, config digest and tool version stamped on every output document"""
    return {'seed': seed, 'config_digest': config_digest, 'tool_version': TOOL_VERSION}


def as_instance(values: Sequence[float], d: Optional[int] = None) -> np.ndarray:
    """
    Convert values into an Instance (1-D float vector).

    Args:
        values: Feature values
        d: Expected dimension (checked when given)

    Returns:
        1-D float64 array

    Raises:
        DimensionError: If the vector is empty or d does not match
        ConfigError: If any entry is not finite
    """
    z = np.asarray(values, dtype=float).reshape(-1)
    if z.size == 0:
        raise DimensionError('Instance must have at least one feature (d = 0)')
    if d is not None and z.size != d:
        raise DimensionError(f'Instance has {z.size} features, expected {d}')
    if not np.all(np.isfinite(z)):
        raise ConfigError('Instance contains non-finite values')
    return z


@dataclass(frozen=True)
class FeatureMeta:
    """Per-feature kind and observed statistics"""
    kind: str
    min: float
    max: float
    std: float

    @property
    def range(self) -> float:
        return self.max - self.min


@dataclass(frozen=True)
class Dataset:
    """Training rows, optional binary labels and per-feature metadata"""
    rows: np.ndarray
    labels: Optional[np.ndarray]
    feature_meta: Tuple[FeatureMeta, ...]
    feature_names: Tuple[str, ...] = ()

    @classmethod
    def from_rows(cls, rows, labels=None, kinds: Optional[Sequence[str]] = None,
                  feature_names: Optional[Sequence[str]] = None) -> 'Dataset':
        """
        Build a Dataset, computing feature metadata from the rows.

        Args:
            rows: n x d array-like of reals
            labels: Optional n class ids in {0, 1}
            kinds: Optional per-feature kind (continuous | categorical)
            feature_names: Optional column names (default x0, x1, ...)

        Returns:
            Dataset
        """
        x = np.asarray(rows, dtype=float)
        if x.ndim != 2:
            raise DimensionError(f'Dataset rows must be a 2-D matrix, got shape {x.shape}')
        n, d = x.shape
        if d == 0:
            raise DimensionError('Dataset must have at least one feature (d = 0)')
        if n == 0:
            raise DataFormatError('Dataset has no rows')
        if not np.all(np.isfinite(x)):
            raise DataFormatError('Dataset contains non-finite values')

        kinds = list(kinds) if kinds is not None else [CONTINUOUS] * d
        if len(kinds) != d:
            raise DimensionError(f'Got {len(kinds)} feature kinds for {d} features')

        meta = []
        for j, kind in enumerate(kinds):
            if kind not in (CONTINUOUS, CATEGORICAL):
                raise ConfigError(f"Unknown feature kind '{kind}' for feature {j}")
            column = x[:, j]
            if kind == CATEGORICAL and not np.all(column == np.round(column)):
                raise DataFormatError(f'Categorical feature {j} holds non-integer values')
            meta.append(FeatureMeta(kind=kind, min=float(column.min()),
                                    max=float(column.max()), std=float(column.std())))

        y = None
        if labels is not None:
            y = np.asarray(labels).astype(int).reshape(-1)
            if y.size != n:
                raise DimensionError(f'Got {y.size} labels for {n} rows')
            if not np.all(np.isin(y, (0, 1))):
                raise DataFormatError('Labels must be 0 or 1')

        names = tuple(feature_names) if feature_names is not None else tuple(f'x{j}' for j in range(d))
        if len(names) != d:
            raise DimensionError(f'Got {len(names)} feature names for {d} features')
        return cls(rows=x, labels=y, feature_meta=tuple(meta), feature_names=names)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def stds(self) -> np.ndarray:
        return np.array([m.std for m in self.feature_meta])

    def ranges(self) -> np.ndarray:
        return np.array([m.range for m in self.feature_meta])

    def kinds(self) -> List[str]:
        return [m.kind for m in self.feature_meta]


@dataclass(frozen=True)
class Neighbourhood:
    """The extracted dataset D_N around an explained instance"""
    points: np.ndarray
    weights: Optional[np.ndarray]
    bb_labels: np.ndarray
    bb_probas: np.ndarray
    strategy_id: str
    seed: int
    masks: Optional[np.ndarray] = None
    flags: Tuple[str, ...] = ()
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.strategy_id not in STRATEGY_IDS:
            raise ConfigError(f"Unknown strategy '{self.strategy_id}'")
        m = self.points.shape[0]
        if self.bb_labels.shape[0] != m or self.bb_probas.shape[0] != m:
            raise DimensionError('Neighbourhood points and labels disagree in length')
        if self.weights is not None:
            if self.weights.shape[0] != m:
                raise DimensionError('Neighbourhood points and weights disagree in length')
            if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
                raise ConfigError('Neighbourhood weights must be finite and non-negative')

    @property
    def size(self) -> int:
        return self.points.shape[0]


def label_neighbourhood(model, points: np.ndarray, strategy_id: str, seed: int,
                        weights: Optional[np.ndarray] = None, **extra: Any) -> Neighbourhood:
    """Evaluate the black box on points and wrap everything into a Neighbourhood"""
    points = np.asarray(points, dtype=float)
    probas = np.asarray(model.predict_proba(points), dtype=float).reshape(-1)
    labels = (probas >= 0.5).astype(int)
    return Neighbourhood(points=points, weights=weights, bb_labels=labels,
                         bb_probas=probas, strategy_id=strategy_id, seed=seed, **extra)


@dataclass(frozen=True)
class Explanation:
    """A surrogate's readable output with provenance"""
    method: str
    surrogate: str
    attribution: Optional[Tuple[float, ...]]
    tree: Optional[Dict[str, Any]]
    base_value: Optional[float]
    fidelity: float
    seed: int
    config_digest: str
    flags: Tuple[str, ...] = ()
    tool_version: str = TOOL_VERSION

    def __post_init__(self):
        if (self.attribution is None) == (self.tree is None):
            raise ConfigError('Explanation needs exactly one of attribution or tree')
        if not 0.0 <= self.fidelity <= 1.0:
            raise ConfigError(f'Fidelity {self.fidelity} outside [0, 1]')

    def to_dict(self) -> Dict[str, Any]:
        return {
            'method': self.method,
            'surrogate': self.surrogate,
            'attribution': list(self.attribution) if self.attribution is not None else None,
            'tree': self.tree,
            'base_value': self.base_value,
            'fidelity': self.fidelity,
            'seed': self.seed,
            'config_digest': self.config_digest,
            'flags': list(self.flags),
            'tool_version': self.tool_version,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + '\n'

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> 'Explanation':
        try:
            attribution = doc.get('attribution')
            return cls(
                method=doc['method'],
                surrogate=doc.get('surrogate', 'ridge'),
                attribution=tuple(attribution) if attribution is not None else None,
                tree=doc.get('tree'),
                base_value=doc.get('base_value'),
                fidelity=doc['fidelity'],
                seed=doc['seed'],
                config_digest=doc['config_digest'],
                flags=tuple(doc.get('flags', ())),
                tool_version=doc.get('tool_version', TOOL_VERSION),
            )
        except KeyError as e:
            raise DataFormatError(f'Explanation document is missing key {e}')
