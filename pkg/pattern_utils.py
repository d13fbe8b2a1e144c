"""
Pattern Utilities Module
Handles PALEX: equal-frequency discretisation, Apriori pattern mining,
the pattern distance and the subset-replacement neighbourhood
"""
import json
from dataclasses import dataclass
from itertools import combinations
from typing import Any, Dict, Optional, Tuple

import numpy as np

from config_utils import PalexConfig, ensure_valid, validate_palex_config
from domain_types import CATEGORICAL, Dataset, Neighbourhood, label_neighbourhood
from error_utils import ConfigError, DataFormatError, DimensionError

Item = Tuple[int, int]

SUPPORT_TOLERANCE = 1e-9


def is_frequent(count: int, n: int, min_support: float) -> bool:
    """count / n >= min_support, with a small tolerance for float thresholds"""
    return count + SUPPORT_TOLERANCE >= min_support * n


@dataclass(frozen=True)
class Binning:
    """Per-feature interior bin edges; None marks a categorical feature (codes are bins)"""
    edges: Tuple[Optional[Tuple[float, ...]], ...]

    @property
    def d(self) -> int:
        return len(self.edges)

    def transform(self, x) -> np.ndarray:
        """Bin ids for a single instance or a matrix of rows"""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        rows = np.atleast_2d(x)
        if rows.shape[1] != self.d:
            raise DimensionError(f'Binning covers {self.d} features, got {rows.shape[1]}')
        binned = np.empty(rows.shape, dtype=int)
        for j, edges in enumerate(self.edges):
            if edges is None:
                binned[:, j] = np.rint(rows[:, j]).astype(int)
            else:
                binned[:, j] = np.searchsorted(np.asarray(edges, dtype=float), rows[:, j], side='right')
        return binned[0] if single else binned

    def to_dict(self) -> Dict[str, Any]:
        return {'edges': [list(e) if e is not None else None for e in self.edges]}

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> 'Binning':
        return cls(edges=tuple(tuple(float(v) for v in e) if e is not None else None
                               for e in doc['edges']))


def discretize(data: Dataset, bins: int) -> Tuple[Binning, np.ndarray]:
    """
    Equal-frequency discretisation of every continuous feature.

    Interior edges are the 1/bins, ..., (bins-1)/bins quantiles of the
    training column, de-duplicated; a value falls in bin k when exactly k
    edges are <= the value. Categorical features keep their integer codes.

    Args:
        data: Training dataset
        bins: Requested number of bins per continuous feature (>= 2)

    Returns:
        Tuple of (Binning, n x d matrix of bin ids)
    """
    if not isinstance(bins, int) or bins < 2:
        raise ConfigError(f'discretize needs bins >= 2, got {bins}')
    quantiles = np.arange(1, bins) / bins
    edges = []
    for j, meta in enumerate(data.feature_meta):
        if meta.kind == CATEGORICAL:
            edges.append(None)
            continue
        column_edges = np.unique(np.quantile(data.rows[:, j], quantiles))
        if meta.range == 0:
            print(f"⚠️  Feature {j} is constant; it is discretised into a single bin")
            column_edges = np.array([])
        edges.append(tuple(float(e) for e in column_edges))
    binning = Binning(edges=tuple(edges))
    return binning, binning.transform(data.rows)


@dataclass(frozen=True)
class Pattern:
    """A frequent itemset: sorted (feature, bin) items with their support"""
    items: Tuple[Item, ...]
    support: float

    def __post_init__(self):
        if not self.items:
            raise ConfigError('A pattern needs at least one item')
        features = [f for f, _ in self.items]
        if len(set(features)) != len(features):
            raise ConfigError('A pattern holds at most one bin per feature')

    def matches(self, binned: np.ndarray) -> np.ndarray:
        """Boolean match vector for a matrix of binned rows (or a bool for one row)"""
        binned = np.asarray(binned)
        rows = np.atleast_2d(binned)
        hit = np.ones(rows.shape[0], dtype=bool)
        for feature, bin_id in self.items:
            hit &= rows[:, feature] == bin_id
        return bool(hit[0]) if binned.ndim == 1 else hit


@dataclass(frozen=True)
class PatternSet:
    """Frequent patterns mined from the training data, with the binning they refer to"""
    patterns: Tuple[Pattern, ...]
    binning: Binning
    min_support: float
    max_length: int

    def __len__(self) -> int:
        return len(self.patterns)

    def item_sets(self) -> Dict[Tuple[Item, ...], float]:
        return {p.items: p.support for p in self.patterns}

    def phi(self, points) -> np.ndarray:
        """m x M matrix of pattern features: support(p_i) where the point matches p_i, else 0"""
        binned = np.atleast_2d(self.binning.transform(points))
        phi = np.zeros((binned.shape[0], len(self.patterns)))
        for i, pattern in enumerate(self.patterns):
            phi[pattern.matches(binned), i] = pattern.support
        return phi

    def to_dict(self) -> Dict[str, Any]:
        return {
            'min_support': self.min_support,
            'max_length': self.max_length,
            'binning': self.binning.to_dict(),
            'patterns': [{'items': [f'{f}:{b}' for f, b in p.items], 'support': p.support}
                         for p in self.patterns],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + '\n'

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> 'PatternSet':
        try:
            patterns = []
            for entry in doc['patterns']:
                items = tuple(sorted(tuple(int(part) for part in item.split(':')) for item in entry['items']))
                patterns.append(Pattern(items=items, support=float(entry['support'])))
            return cls(patterns=tuple(patterns), binning=Binning.from_dict(doc['binning']),
                       min_support=float(doc['min_support']), max_length=int(doc['max_length']))
        except (KeyError, ValueError, AttributeError) as e:
            raise DataFormatError(f'Invalid pattern set document: {e}')


def _join(left: Tuple[Item, ...], right: Tuple[Item, ...]) -> Optional[Tuple[Item, ...]]:
    """Apriori join: same prefix, last items on increasing distinct features"""
    if left[:-1] != right[:-1] or left[-1][0] >= right[-1][0]:
        return None
    return left + (right[-1],)


def apriori(binned: np.ndarray, min_support: float, max_length: int,
            binning: Optional[Binning] = None) -> PatternSet:
    """
    Levelwise frequent itemset mining over (feature, bin) items.

    Candidates of length k+1 join two frequent k-itemsets sharing their first
    k-1 items and are pruned unless every k-subset is frequent. Each itemset
    holds at most one item per feature.

    Args:
        binned: n x d matrix of bin ids
        min_support: Minimum support in (0, 1]
        max_length: Longest itemset to mine (>= 1)
        binning: Binning the ids came from (stored on the result)

    Returns:
        PatternSet ordered by length, then items
    """
    binned = np.asarray(binned)
    if binned.ndim != 2:
        raise DimensionError('apriori needs a 2-D matrix of bin ids')
    if not 0.0 < min_support <= 1.0:
        raise ConfigError(f'min_support must lie in (0, 1], got {min_support}')
    if max_length < 1:
        raise ConfigError(f'max_length must be >= 1, got {max_length}')
    n, d = binned.shape

    level: Dict[Tuple[Item, ...], np.ndarray] = {}
    for j in range(d):
        for bin_id in np.unique(binned[:, j]):
            rows = binned[:, j] == bin_id
            if is_frequent(int(rows.sum()), n, min_support):
                level[((j, int(bin_id)),)] = rows

    found: Dict[Tuple[Item, ...], np.ndarray] = dict(level)
    length = 1
    while level and length < max_length:
        keys = sorted(level)
        next_level: Dict[Tuple[Item, ...], np.ndarray] = {}
        for a, b in combinations(keys, 2):
            candidate = _join(a, b)
            if candidate is None:
                continue
            if any(candidate[:i] + candidate[i + 1:] not in level for i in range(len(candidate))):
                continue
            rows = level[a] & level[b]
            if is_frequent(int(rows.sum()), n, min_support):
                next_level[candidate] = rows
        found.update(next_level)
        level = next_level
        length += 1

    patterns = tuple(Pattern(items=items, support=float(found[items].sum()) / n)
                     for items in sorted(found, key=lambda items: (len(items), items)))
    if binning is None:
        binning = Binning(edges=tuple(None for _ in range(d)))
    return PatternSet(patterns=patterns, binning=binning, min_support=min_support, max_length=max_length)


def mine_patterns(data: Dataset, cfg: PalexConfig) -> PatternSet:
    """Discretise the training data and mine its frequent patterns"""
    binning, binned = discretize(data, cfg.bins)
    return apriori(binned, cfg.min_support, cfg.max_length, binning=binning)


def pattern_feature(x, pattern: Pattern, binning: Binning) -> float:
    """support(pattern) when binned x matches every item, else 0"""
    return pattern.support if pattern.matches(binning.transform(np.asarray(x, dtype=float))) else 0.0


def palex_distance(x, z, pattern_set: PatternSet, binning: Optional[Binning] = None) -> float:
    """
    Sum over patterns of |phi_i(x) - phi_i(z)|.

    Patterns matched by both or by neither instance contribute nothing.
    An empty pattern set gives distance 0 (with a warning).
    """
    if len(pattern_set) == 0:
        print("⚠️  PALEX: pattern set is empty; every distance is 0")
        return 0.0
    if binning is not None and binning != pattern_set.binning:
        pattern_set = PatternSet(patterns=pattern_set.patterns, binning=binning,
                                 min_support=pattern_set.min_support, max_length=pattern_set.max_length)
    phi = pattern_set.phi(np.vstack([np.asarray(x, dtype=float), np.asarray(z, dtype=float)]))
    return float(np.abs(phi[0] - phi[1]).sum())


def distance_to_weight(distances: np.ndarray, weight_map: str) -> np.ndarray:
    """exp(-d) or 1 / (1 + d); both equal 1 exactly at distance 0"""
    if weight_map == 'exp':
        return np.exp(-distances)
    if weight_map == 'inverse':
        return 1.0 / (1.0 + distances)
    raise ConfigError(f"Unknown PALEX weight map '{weight_map}' (expected 'exp' or 'inverse')")


def palex_neighbourhood(model, data: Dataset, z_e: np.ndarray, cfg: PalexConfig, seed: int,
                        pattern_set: Optional[PatternSet] = None) -> Neighbourhood:
    """
    Subset-replacement sampling weighted by the pattern distance to z_e.

    Each point keeps z_e on a random feature subset Q (every feature joins Q
    independently with probability 1/2, so the empty and the full subset both
    occur) and takes the remaining coordinates from a random training row.

    Args:
        model: Black box
        data: Training data (background rows, pattern mining)
        z_e: Instance to explain
        cfg: PalexConfig
        seed: Sampling seed
        pattern_set: Pre-mined patterns (mined from data when omitted)

    Returns:
        Weighted Neighbourhood with the subset masks attached
    """
    ensure_valid(validate_palex_config(cfg))
    if data.n == 0:
        raise ConfigError('PALEX needs a non-empty training set')
    if z_e.shape[0] != data.d:
        raise DimensionError(f'Instance has {z_e.shape[0]} features, training data has {data.d}')
    if pattern_set is None:
        pattern_set = mine_patterns(data, cfg)

    rng = np.random.default_rng(seed)
    masks = rng.uniform(size=(cfg.sample_count, data.d)) < 0.5
    donors = rng.integers(0, data.n, size=cfg.sample_count)
    points = np.where(masks, z_e, data.rows[donors])

    if len(pattern_set) == 0:
        print("⚠️  PALEX: no frequent patterns at this min_support; all weights are 1")
        distances = np.zeros(cfg.sample_count)
    else:
        phi_points = pattern_set.phi(points)
        phi_instance = pattern_set.phi(z_e)[0]
        distances = np.abs(phi_points - phi_instance).sum(axis=1)
    weights = distance_to_weight(distances, cfg.weight_map)
    return label_neighbourhood(model, points, 'palex', seed, weights=weights, masks=masks,
                               diagnostics={'pattern_count': len(pattern_set)})
