import numpy as np
import pytest

from blackbox_utils import FunctionModel, MlpModel
from config_utils import KernelShapConfig
from data_utils import generate_blobs
from domain_types import Dataset
from error_utils import ConfigError, EnumerationCapError, EstimationError
from shapley_utils import (Background, build_background, coalition_value, exact_shapley,
                           kernelshap_neighbourhood, kernelshap_solve, kmeans_background,
                           proper_masks, sample_coalitions, shapley_kernel_weight)


def _linear_model(a, b=0.0):
    a = np.asarray(a, dtype=float)
    return FunctionModel(lambda x: x @ a + b, n_features=a.size)


@pytest.mark.parametrize('d', range(2, 9))
def test_full_enumeration_matches_exact_shapley(d):
    for trial in range(20):
        rng = np.random.default_rng(1000 * d + trial)
        model = MlpModel.random(d, hidden=8, seed=int(rng.integers(1 << 30)))
        background = Background(rows=rng.normal(size=(10, d)))
        z_e = rng.normal(size=d)
        phi, base = kernelshap_solve(model, z_e, background)
        oracle, oracle_base = exact_shapley(model, z_e, background)
        assert np.max(np.abs(phi - oracle)) <= 1e-8
        assert base == pytest.approx(oracle_base, abs=1e-12)


def test_efficiency_symmetry_and_dummy():
    model = FunctionModel(lambda x: np.tanh(x[:, 0] * x[:, 1]) + 0.5 * x[:, 0] + 0.5 * x[:, 1],
                          n_features=3)
    rng = np.random.default_rng(2)
    rows = rng.normal(size=(15, 3))
    background = Background(rows=np.vstack([rows, rows[:, [1, 0, 2]]]))
    z_e = np.array([0.7, 0.7, -1.2])
    phi, base = exact_shapley(model, z_e, background)

    assert phi.sum() == pytest.approx(model.predict_proba(z_e) - base, abs=1e-12)
    assert phi[0] == pytest.approx(phi[1], abs=1e-12)
    assert phi[2] == pytest.approx(0.0, abs=1e-12)


def test_linear_game_closed_form():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 7))
        a = rng.normal(size=d)
        rows = rng.normal(size=(12, d))
        z_e = rng.normal(size=d)
        phi, _ = exact_shapley(_linear_model(a, 0.3), z_e, Background(rows=rows))
        assert np.allclose(phi, a * (z_e - rows.mean(axis=0)), atol=1e-9)


def test_kernel_weight_values():
    assert shapley_kernel_weight(4, 1) == pytest.approx(0.25)
    assert shapley_kernel_weight(4, 2) == pytest.approx(0.125)
    assert shapley_kernel_weight(4, 3) == pytest.approx(0.25)
    for s in (0, 4):
        with pytest.raises(ConfigError):
            shapley_kernel_weight(4, s)


def test_coalition_value_extremes():
    model = _linear_model([1.0, 2.0])
    rows = np.array([[0.0, 0.0], [2.0, 4.0]])
    z_e = np.array([1.0, 1.0])
    assert coalition_value(model, z_e, np.array([False, False]), rows) == pytest.approx(5.0)
    assert coalition_value(model, z_e, np.array([True, True]), rows) == pytest.approx(3.0)
    assert coalition_value(model, z_e, np.array([True, False]), rows) == pytest.approx(5.0)


def test_enumeration_cap():
    z_e = np.zeros(13)
    model = _linear_model(np.ones(13))
    rows = np.ones((3, 13))
    with pytest.raises(EnumerationCapError):
        kernelshap_solve(model, z_e, rows)
    with pytest.raises(EnumerationCapError):
        exact_shapley(model, z_e, rows)
    with pytest.raises(EnumerationCapError):
        kernelshap_solve(_linear_model(np.ones(3)), np.zeros(3), np.ones((2, 3)), enumeration_cap=2)


def test_sampled_solve_needs_enough_coalitions():
    with pytest.raises(ConfigError):
        kernelshap_solve(_linear_model(np.ones(4)), np.zeros(4), np.ones((2, 4)), sample_count=3)


def test_sampled_solve_keeps_efficiency_above_cap():
    d = 14
    rng = np.random.default_rng(5)
    a = rng.normal(size=d)
    rows = rng.normal(size=(6, d))
    z_e = rng.normal(size=d)
    model = _linear_model(a)
    phi, base = kernelshap_solve(model, z_e, rows, sample_count=300, seed=1)
    assert phi.sum() == pytest.approx(model.predict_proba(z_e) - base, abs=1e-9)
    # additive games are recovered exactly from any spanning coalition set
    assert np.allclose(phi, a * (z_e - rows.mean(axis=0)), atol=1e-8)


def test_sample_coalitions():
    masks = sample_coalitions(10, 50, seed=0)
    assert masks.shape == (50, 10)
    assert len({m.tobytes() for m in masks}) == 50
    sizes = masks.sum(axis=1)
    assert sizes.min() >= 1 and sizes.max() <= 9
    assert np.array_equal(sample_coalitions(10, 50, seed=0), masks)
    assert sample_coalitions(4, 100, seed=0).shape == (14, 4)


def test_single_feature():
    model = _linear_model([2.0])
    phi, base = kernelshap_solve(model, np.array([3.0]), np.array([[1.0], [0.0]]))
    assert phi.tolist() == pytest.approx([5.0])
    assert base == pytest.approx(1.0)


def test_neighbourhood_holds_every_hybrid():
    rows = np.array([[10.0, 20.0, 30.0], [40.0, 50.0, 60.0]])
    data = Dataset.from_rows(rows)
    z_e = np.array([1.0, 2.0, 3.0])
    model = _linear_model([1.0, 0.0, 0.0])
    nb = kernelshap_neighbourhood(model, data, z_e, Background(rows=rows))

    assert nb.size == 2 * (2 ** 3 - 2)
    assert nb.masks.shape == (12, 3)
    for point, mask, weight in zip(nb.points, nb.masks, nb.weights):
        assert np.array_equal(point[mask], z_e[mask])
        assert any(np.array_equal(point[~mask], row[~mask]) for row in rows)
        assert weight == pytest.approx(shapley_kernel_weight(3, int(mask.sum())))
    assert len(proper_masks(3)) == 6


def test_kmeans_wcss_never_increases():
    rng = np.random.default_rng(9)
    rows = np.vstack([rng.normal(loc=c, scale=0.3, size=(60, 2)) for c in ((0, 0), (3, 3), (-3, 2))])
    background = kmeans_background(rows, k=3, iterations=50, seed=1)
    history = np.array(background.wcss_history)
    assert np.all(np.diff(history) <= 1e-9 * history[0])
    assert background.n == 3
    assert background.counts.sum() == rows.shape[0]


def test_kmeans_rejects_bad_k():
    with pytest.raises(EstimationError):
        kmeans_background(np.zeros((3, 2)), k=4, iterations=5, seed=0)


def test_build_background(moons):
    assert build_background(moons, KernelShapConfig(), seed=0).n == moons.n
    small = build_background(moons, KernelShapConfig(background_size=8), seed=0)
    assert small.n == 8 and small.counts.sum() == moons.n


def test_values_add_across_summed_models():
    for seed in range(5):
        rng = np.random.default_rng(300 + seed)
        d = int(rng.integers(2, 6))
        f = MlpModel.random(d, hidden=6, seed=seed)
        g = MlpModel.random(d, hidden=6, seed=seed + 50)
        both = FunctionModel(lambda x: f.predict_proba(x) + g.predict_proba(x), n_features=d)
        background = Background(rows=rng.normal(size=(8, d)))
        z_e = rng.normal(size=d)

        phi_f, base_f = exact_shapley(f, z_e, background)
        phi_g, base_g = exact_shapley(g, z_e, background)
        phi_sum, base_sum = exact_shapley(both, z_e, background)
        assert np.allclose(phi_sum, phi_f + phi_g, atol=1e-12)
        assert base_sum == pytest.approx(base_f + base_g, abs=1e-12)

        solved, _ = kernelshap_solve(both, z_e, background)
        assert np.allclose(solved, phi_f + phi_g, atol=1e-8)


@pytest.mark.parametrize('d', [3, 5])
def test_sampling_every_coalition_matches_full_enumeration(d):
    rng = np.random.default_rng(d)
    model = MlpModel.random(d, hidden=8, seed=d)
    background = Background(rows=rng.normal(size=(10, d)))
    z_e = rng.normal(size=d)
    full, base = kernelshap_solve(model, z_e, background)
    for m in (2 ** d - 2, 2 ** d + 10):
        sampled, sampled_base = kernelshap_solve(model, z_e, background, sample_count=m, seed=4)
        assert np.allclose(sampled, full, atol=1e-12)
        assert sampled_base == pytest.approx(base, abs=1e-12)


def test_kmeans_with_one_cluster_per_row_returns_the_rows():
    rows = np.random.default_rng(11).normal(size=(7, 3))
    background = kmeans_background(rows, k=7, iterations=10, seed=2)
    assert np.array_equal(background.rows, rows)
    assert background.counts.tolist() == [1] * 7
    assert background.wcss_history[-1] == 0.0


def test_kmeans_finds_two_separated_blobs():
    blobs = generate_blobs(200, [[0.0, 0.0], [6.0, 6.0]], std=0.3, seed=4)
    for seed in range(5):
        background = kmeans_background(blobs, k=2, iterations=50, seed=seed)
        centroids = background.rows[np.argsort(background.rows[:, 0])]
        assert np.allclose(centroids[0], blobs.rows[blobs.labels == 0].mean(axis=0), atol=1e-9)
        assert np.allclose(centroids, [[0.0, 0.0], [6.0, 6.0]], atol=0.1)
        assert sorted(background.counts.tolist()) == [100, 100]
