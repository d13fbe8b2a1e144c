"""
Counterfactual Utilities Module
Growing Spheres counterfactual search and the GSLS uniform-ball neighbourhood
"""
import numpy as np

from config_utils import AUTO, GslsConfig, ensure_valid, validate_gsls_config
from domain_types import Neighbourhood, label_neighbourhood
from error_utils import ConfigError, NoCounterfactualError


def sample_sphere_directions(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    """Unit vectors distributed uniformly on the (d-1)-sphere"""
    directions = rng.normal(size=(count, d))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return directions / norms


def sample_ball(rng: np.random.Generator, center: np.ndarray, radius: float, count: int) -> np.ndarray:
    """Points uniform in the euclidean ball B(center, radius): direction x radius * u^(1/d)"""
    d = center.shape[0]
    radii = radius * rng.uniform(size=(count, 1)) ** (1.0 / d)
    return center + sample_sphere_directions(rng, count, d) * radii


def sample_layer(rng: np.random.Generator, center: np.ndarray, inner: float, outer: float,
                 count: int) -> np.ndarray:
    """Points uniform in the spherical layer inner <= |x - center| <= outer"""
    d = center.shape[0]
    u = rng.uniform(size=(count, 1))
    radii = (inner ** d + u * (outer ** d - inner ** d)) ** (1.0 / d)
    return center + sample_sphere_directions(rng, count, d) * radii


def growing_spheres_counterfactual(model, z_e: np.ndarray, eta: float, max_radius: float,
                                   layer_samples: int, seed: int) -> np.ndarray:
    """
    Closest enemy of z_e found by Growing Spheres.

    Sample the ball of radius eta; while it contains enemies, halve the radius.
    Then sweep spherical layers [a, a + eta], [a + eta, a + 2 eta], ... and
    return the closest enemy of the first layer that holds one.

    Args:
        model: Binary black box
        z_e: Instance to explain
        eta: Layer width (> 0)
        max_radius: Search stops once layers start beyond this radius
        layer_samples: Points drawn per ball/layer
        seed: Sampling seed

    Returns:
        CF(z_e), an instance with predict_label(CF) != predict_label(z_e)

    Raises:
        NoCounterfactualError: No enemy within max_radius
    """
    if eta <= 0 or max_radius <= 0 or layer_samples < 1:
        raise ConfigError('Growing Spheres needs eta > 0, max_radius > 0 and layer_samples >= 1')
    rng = np.random.default_rng(seed)
    own_label = int(model.predict_label(z_e))

    def enemies_of(points: np.ndarray) -> np.ndarray:
        return points[np.asarray(model.predict_label(points)) != own_label]

    radius = eta
    while len(enemies_of(sample_ball(rng, z_e, radius, layer_samples))) > 0:
        radius /= 2.0
        if radius < 1e-12:
            break

    inner = radius
    while inner < max_radius:
        outer = inner + eta
        enemies = enemies_of(sample_layer(rng, z_e, inner, outer, layer_samples))
        if len(enemies) > 0:
            distances = np.linalg.norm(enemies - z_e, axis=1)
            return enemies[int(np.argmin(distances))]
        inner = outer
    raise NoCounterfactualError(f'No counterfactual found within max_radius {max_radius:g}')


def resolve_gsls_config(cfg: GslsConfig, data) -> GslsConfig:
    """Replace 'auto' fields with data-derived values (0.1 x mean range, 10 x diameter, 0.2 x mean range)"""
    ranges = data.ranges()
    mean_range = float(np.mean(ranges)) if np.mean(ranges) > 0 else 1.0
    diameter = float(np.linalg.norm(ranges)) or 1.0
    eta = 0.1 * mean_range if cfg.eta == AUTO else cfg.eta
    max_radius = 10.0 * diameter if cfg.max_radius == AUTO else cfg.max_radius
    radius = 0.2 * mean_range if cfg.radius == AUTO else cfg.radius
    return GslsConfig(radius=radius, sample_count=cfg.sample_count, eta=eta,
                      max_radius=max(max_radius, eta), layer_samples=cfg.layer_samples)


def gsls_neighbourhood(model, z_e: np.ndarray, cfg: GslsConfig, seed: int) -> Neighbourhood:
    """
    Uniform sample of the ball of radius r around the counterfactual of z_e; no weights.

    cfg must be fully resolved (no 'auto' fields); see resolve_gsls_config.
    """
    ensure_valid(validate_gsls_config(cfg))
    if AUTO in (cfg.radius, cfg.eta, cfg.max_radius):
        raise ConfigError('gsls_neighbourhood needs a resolved config; call resolve_gsls_config first')
    counterfactual = growing_spheres_counterfactual(model, z_e, cfg.eta, cfg.max_radius,
                                                    cfg.layer_samples, seed)
    rng = np.random.default_rng(seed + 1)
    points = sample_ball(rng, counterfactual, cfg.radius, cfg.sample_count)
    return label_neighbourhood(model, points, 'gsls', seed, weights=None,
                               diagnostics={'counterfactual': counterfactual.tolist(),
                                            'radius': cfg.radius})
