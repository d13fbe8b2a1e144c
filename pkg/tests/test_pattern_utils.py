import json
from itertools import combinations

import numpy as np
import pytest

from config_utils import PalexConfig
from domain_types import Dataset
from error_utils import ConfigError, DataFormatError
from pattern_utils import (Binning, Pattern, PatternSet, apriori, discretize, distance_to_weight,
                           mine_patterns, palex_distance, palex_neighbourhood, pattern_feature)


def brute_force_itemsets(binned: np.ndarray, min_support: float, max_length: int):
    """Every (feature, bin) itemset occurring in some row, kept when frequent"""
    n, d = binned.shape
    found = {}
    for length in range(1, max_length + 1):
        for features in combinations(range(d), length):
            for values in {tuple(row[list(features)]) for row in binned}:
                count = int(np.sum(np.all(binned[:, list(features)] == values, axis=1)))
                if count + 1e-9 >= min_support * n:
                    found[tuple(zip(features, (int(v) for v in values)))] = count / n
    return found


def categorical_binning(d: int) -> Binning:
    return Binning(edges=tuple(None for _ in range(d)))


def test_apriori_matches_brute_force_on_hand_dataset():
    binned = np.array([[0, 1, 1], [0, 1, 0], [1, 1, 0], [0, 0, 1], [0, 1, 1]])
    result = apriori(binned, 0.4, 3)
    expected = brute_force_itemsets(binned, 0.4, 3)
    assert result.item_sets().keys() == expected.keys()
    assert result.item_sets()[((0, 0), (1, 1))] == pytest.approx(0.6)


@pytest.mark.parametrize('min_support', [0.2, 0.4, 0.6, 0.8, 1.0])
def test_apriori_matches_brute_force_on_random_datasets(min_support):
    rng = np.random.default_rng(int(min_support * 10))
    for _ in range(25):
        n = int(rng.integers(1, 13))
        d = int(rng.integers(1, 7))
        binned = rng.integers(0, 3, size=(n, d))
        result = apriori(binned, min_support, d).item_sets()
        expected = brute_force_itemsets(binned, min_support, d)
        assert result.keys() == expected.keys()
        for items, support in expected.items():
            assert result[items] == pytest.approx(support)


def test_apriori_respects_max_length():
    binned = np.zeros((4, 5), dtype=int)
    result = apriori(binned, 0.5, 2)
    assert max(len(p.items) for p in result.patterns) == 2
    assert len(result) == 5 + 10
    lengths = [len(p.items) for p in result.patterns]
    assert lengths == sorted(lengths)


def test_apriori_rejects_bad_arguments():
    with pytest.raises(ConfigError):
        apriori(np.zeros((3, 2), dtype=int), 0.0, 2)
    with pytest.raises(ConfigError):
        apriori(np.zeros((3, 2), dtype=int), 0.5, 0)


def test_equal_frequency_bins():
    rng = np.random.default_rng(0)
    data = Dataset.from_rows(rng.uniform(size=(1000, 2)))
    binning, binned = discretize(data, 4)
    for j in range(2):
        counts = np.bincount(binned[:, j], minlength=4)
        assert counts.shape == (4,)
        assert np.all(np.abs(counts - 250) <= 2)
    assert np.array_equal(binning.transform(data.rows[3]), binned[3])


def test_constant_feature_gets_one_bin(capsys):
    data = Dataset.from_rows(np.column_stack([np.arange(20.0), np.full(20, 3.0)]))
    binning, binned = discretize(data, 4)
    assert binning.edges[1] == ()
    assert np.all(binned[:, 1] == 0)
    assert 'constant' in capsys.readouterr().out


def test_categorical_features_keep_their_codes():
    data = Dataset.from_rows(np.array([[0.0, 2.0], [1.0, 5.0], [2.0, 7.0]]),
                             kinds=['categorical', 'continuous'])
    binning, binned = discretize(data, 2)
    assert binning.edges[0] is None
    assert binned[:, 0].tolist() == [0, 1, 2]


def test_distance_sums_unshared_supports():
    pattern_set = PatternSet(patterns=(Pattern(((0, 1),), 0.4), Pattern(((1, 1),), 0.3),
                                       Pattern(((2, 1),), 0.5)),
                             binning=categorical_binning(3), min_support=0.3, max_length=1)
    x = np.array([1.0, 0.0, 1.0])
    z = np.array([0.0, 1.0, 1.0])
    assert palex_distance(x, z, pattern_set) == pytest.approx(0.7)
    assert palex_distance(x, x, pattern_set) == 0.0
    assert pattern_feature(x, pattern_set.patterns[0], pattern_set.binning) == 0.4
    assert pattern_feature(z, pattern_set.patterns[0], pattern_set.binning) == 0.0


def test_distance_is_a_pseudometric(moons):
    pattern_set = mine_patterns(moons, PalexConfig(min_support=0.1))
    assert len(pattern_set) > 0
    rng = np.random.default_rng(1)
    triples = moons.rows[rng.integers(0, moons.n, size=(60, 3))]
    for x, y, z in triples:
        xz = palex_distance(x, z, pattern_set)
        assert xz == pytest.approx(palex_distance(z, x, pattern_set))
        assert xz <= palex_distance(x, y, pattern_set) + palex_distance(y, z, pattern_set) + 1e-12


def test_empty_pattern_set_gives_zero_distance(capsys):
    empty = PatternSet(patterns=(), binning=categorical_binning(2), min_support=0.5, max_length=2)
    assert palex_distance(np.zeros(2), np.ones(2), empty) == 0.0
    assert 'empty' in capsys.readouterr().out


def test_weight_maps():
    distances = np.array([0.0, 1.0])
    assert distance_to_weight(distances, 'exp').tolist() == pytest.approx([1.0, np.exp(-1.0)])
    assert distance_to_weight(distances, 'inverse').tolist() == pytest.approx([1.0, 0.5])
    with pytest.raises(ConfigError):
        distance_to_weight(distances, 'gaussian')


def test_palex_points_mix_instance_and_training_rows(moons, moons_model):
    z_e = moons.rows[11]
    nb = palex_neighbourhood(moons_model, moons, z_e, PalexConfig(sample_count=300), seed=5000)
    assert nb.size == 300
    assert np.all((nb.weights > 0) & (nb.weights <= 1))
    for point, mask in zip(nb.points, nb.masks):
        assert np.array_equal(point[mask], z_e[mask])
        if not mask.all():
            assert np.any(np.all(moons.rows[:, ~mask] == point[~mask], axis=1))
    full = nb.masks.all(axis=1)
    assert full.any()
    assert np.all(nb.weights[full] == 1.0)
    assert nb.diagnostics['pattern_count'] > 0


def test_palex_is_deterministic(moons, moons_model):
    cfg = PalexConfig(sample_count=100, weight_map='inverse')
    a = palex_neighbourhood(moons_model, moons, moons.rows[0], cfg, seed=3)
    b = palex_neighbourhood(moons_model, moons, moons.rows[0], cfg, seed=3)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.weights, b.weights)


def test_pattern_validation():
    with pytest.raises(ConfigError):
        Pattern(items=(), support=0.5)
    with pytest.raises(ConfigError):
        Pattern(items=((0, 1), (0, 2)), support=0.5)


def test_pattern_set_document(moons):
    pattern_set = mine_patterns(moons, PalexConfig())
    doc = json.loads(pattern_set.to_json())
    assert doc['patterns'][0]['items'][0].count(':') == 1
    restored = PatternSet.from_dict(doc)
    assert restored.item_sets() == pattern_set.item_sets()
    assert restored.binning == pattern_set.binning
    with pytest.raises(DataFormatError):
        PatternSet.from_dict({'patterns': [{'items': ['x'], 'support': 1.0}]})
