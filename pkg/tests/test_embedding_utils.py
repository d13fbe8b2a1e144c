import numpy as np
import pytest

from embedding_utils import lid_estimate, local_pca, nearest_neighbours
from error_utils import ConfigError, EstimationError


def _line_in_5d(seed):
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=5)
    direction /= np.linalg.norm(direction)
    t = rng.uniform(0.0, 1.0, size=1000)
    return np.outer(t, direction) + rng.normal(size=5), t


def _disc(seed):
    rng = np.random.default_rng(seed)
    radius = np.sqrt(rng.uniform(size=1000))
    angle = rng.uniform(0.0, 2 * np.pi, size=1000)
    return np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])


def test_nearest_neighbours_excludes_self():
    rows = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
    distances, indices = nearest_neighbours(rows, rows[0], 2, exclude_self=True)
    assert indices.tolist() == [1, 2]
    assert distances.tolist() == [1.0, 3.0]


@pytest.mark.parametrize('seed', range(10))
def test_lid_of_a_line(seed):
    rows, t = _line_in_5d(seed)
    queries = np.flatnonzero((t > 0.3) & (t < 0.7))[:50]
    estimate = np.mean([lid_estimate(rows, rows[q], 20) for q in queries])
    assert 0.6 <= estimate <= 1.5


@pytest.mark.parametrize('seed', range(10))
def test_lid_of_a_disc(seed):
    rows = _disc(seed)
    queries = np.flatnonzero(np.linalg.norm(rows, axis=1) < 0.5)[:50]
    estimate = np.mean([lid_estimate(rows, rows[q], 20) for q in queries])
    assert 1.5 <= estimate <= 2.6


def test_lid_errors():
    ring = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    with pytest.raises(EstimationError, match='equal'):
        lid_estimate(ring, np.zeros(2), 3)
    with pytest.raises(EstimationError):
        lid_estimate(ring, np.zeros(2), 1)
    with pytest.raises(EstimationError):
        lid_estimate(ring, np.zeros(2), 20)


def test_local_pca_on_a_flat_subspace():
    rng = np.random.default_rng(0)
    t = rng.uniform(-1, 1, size=200)
    rows = np.array([1.0, -2.0, 0.5]) + np.outer(t, [0.6, 0.0, 0.8])
    embedding = local_pca(rows, rows[0], 50, 1)
    assert embedding.out_dim == 1
    assert np.allclose(embedding.components.T @ embedding.components, np.eye(1), atol=1e-10)
    assert np.max(embedding.residual(rows)) <= 1e-9
    assert np.allclose(embedding.project(embedding.mean), 0.0)
    # largest-magnitude entry of each component is positive
    assert embedding.components[2, 0] > 0


def test_local_pca_reduces_to_rank(capsys):
    rows = np.column_stack([np.linspace(0, 1, 30), np.zeros(30)])
    embedding = local_pca(rows, rows[5], 20, 2)
    assert embedding.out_dim == 1
    assert 'exceeds neighbourhood rank' in capsys.readouterr().out


def test_local_pca_components_are_orthonormal_and_ordered():
    rng = np.random.default_rng(1)
    rows = rng.normal(size=(300, 4)) * np.array([3.0, 2.0, 1.0, 0.5])
    embedding = local_pca(rows, np.zeros(4), 300, 3)
    c = embedding.components
    assert np.allclose(c.T @ c, np.eye(3), atol=1e-10)
    assert np.all(np.diff(embedding.explained_variance) <= 0)


def test_local_pca_rejects_bad_dimension():
    rows = np.random.default_rng(2).normal(size=(10, 3))
    with pytest.raises(ConfigError):
        local_pca(rows, rows[0], 10, 4)
    with pytest.raises(ConfigError):
        local_pca(rows, rows[0], 10, 0)
