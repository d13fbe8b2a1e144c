import json

import numpy as np
import pytest

from domain_types import (CATEGORICAL, CONTINUOUS, TOOL_VERSION, Dataset, Explanation, Neighbourhood,
                          as_instance, label_neighbourhood)
from error_utils import ConfigError, DataFormatError, DimensionError


def test_as_instance_checks_dimension_and_finiteness():
    assert as_instance([1, 2]).dtype == float
    with pytest.raises(DimensionError):
        as_instance([])
    with pytest.raises(DimensionError):
        as_instance([1.0, 2.0], d=3)
    with pytest.raises(ConfigError):
        as_instance([1.0, np.nan])


def test_dataset_metadata():
    data = Dataset.from_rows([[0.0, 1.0], [2.0, 1.0], [4.0, 3.0]], labels=[0, 1, 1],
                             kinds=[CONTINUOUS, CATEGORICAL])
    assert data.n == 3 and data.d == 2
    assert data.feature_meta[0].min == 0.0 and data.feature_meta[0].max == 4.0
    assert data.ranges().tolist() == [4.0, 2.0]
    assert data.kinds() == [CONTINUOUS, CATEGORICAL]
    assert data.feature_names == ('x0', 'x1')


def test_dataset_rejects_bad_input():
    with pytest.raises(DataFormatError):
        Dataset.from_rows([[0.5]], kinds=[CATEGORICAL])
    with pytest.raises(DataFormatError):
        Dataset.from_rows([[0.0], [1.0]], labels=[0, 2])
    with pytest.raises(DimensionError):
        Dataset.from_rows([[0.0], [1.0]], labels=[0])
    with pytest.raises(DimensionError):
        Dataset.from_rows(np.zeros((3, 0)))


def test_neighbourhood_validates_lengths_and_weights():
    points = np.zeros((3, 2))
    labels = np.zeros(3, dtype=int)
    probas = np.zeros(3)
    with pytest.raises(DimensionError):
        Neighbourhood(points, np.ones(2), labels, probas, 'lime', 0)
    with pytest.raises(ConfigError):
        Neighbourhood(points, np.array([1.0, -1.0, 1.0]), labels, probas, 'lime', 0)
    with pytest.raises(ConfigError):
        Neighbourhood(points, None, labels, probas, 'nope', 0)


def test_label_neighbourhood_thresholds_at_half(sign_model):
    nb = label_neighbourhood(sign_model, np.array([[-1.0, 0.0], [1.0, 0.0]]), 'gsls', 3)
    assert nb.bb_labels.tolist() == [0, 1]
    assert nb.size == 2 and nb.seed == 3


def test_explanation_needs_exactly_one_payload():
    with pytest.raises(ConfigError):
        Explanation('lime', 'ridge', None, None, 0.0, 1.0, 0, 'x')
    with pytest.raises(ConfigError):
        Explanation('lime', 'ridge', (1.0,), {'rules': ''}, 0.0, 1.0, 0, 'x')
    with pytest.raises(ConfigError):
        Explanation('lime', 'ridge', (1.0,), None, 0.0, 1.5, 0, 'x')


def test_explanation_document_carries_provenance():
    explanation = Explanation('lime', 'ridge', (3.0, -1.0), None, 0.25, 0.9, 7, 'abc', flags=('single_class',))
    doc = json.loads(explanation.to_json())
    assert doc['seed'] == 7 and doc['config_digest'] == 'abc'
    assert doc['tool_version'] == TOOL_VERSION
    assert Explanation.from_dict(doc) == explanation
    with pytest.raises(DataFormatError):
        Explanation.from_dict({'method': 'lime'})
