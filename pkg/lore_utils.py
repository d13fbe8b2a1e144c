"""
LORE Utilities Module
Handles the genetic neighbourhood search (same-class and other-class populations)
"""
from dataclasses import dataclass
from typing import List

import numpy as np

from config_utils import LoreConfig, ensure_valid, validate_lore_config
from domain_types import CATEGORICAL, Dataset, Neighbourhood, label_neighbourhood
from error_utils import ConfigError

SAME = 'same'
DIFFERENT = 'different'

JITTER_FRACTION = 0.05


def lore_distance(x: np.ndarray, z: np.ndarray, feature_meta) -> float:
    """
    Mixed distance in [0, 1].

    (m_cat/d) * simple-matching mismatch ratio over categorical features
    + (m_cont/d) * euclidean distance of min-max scaled continuous features / sqrt(m_cont).

    Raises:
        ConfigError: A continuous feature has zero training range
    """
    return float(lore_distances(np.atleast_2d(z), x, feature_meta)[0])


def lore_distances(points: np.ndarray, z_e: np.ndarray, feature_meta) -> np.ndarray:
    """lore_distance from z_e to every row of points"""
    d = len(feature_meta)
    categorical = np.array([m.kind == CATEGORICAL for m in feature_meta])
    continuous = ~categorical
    m_cat = int(categorical.sum())
    m_cont = d - m_cat

    total = np.zeros(points.shape[0])
    if m_cat:
        mismatch = np.mean(points[:, categorical] != z_e[categorical], axis=1)
        total += (m_cat / d) * mismatch
    if m_cont:
        ranges = np.array([m.range for m, c in zip(feature_meta, continuous) if c])
        if np.any(ranges == 0):
            raise ConfigError('LORE distance needs a non-zero training range on every continuous feature')
        scaled = (points[:, continuous] - z_e[continuous]) / ranges
        total += (m_cont / d) * np.linalg.norm(scaled, axis=1) / np.sqrt(m_cont)
    return np.clip(total, 0.0, 1.0)


def lore_fitness(z: np.ndarray, z_e: np.ndarray, target: str, model, distance: float) -> float:
    """
    fitness_same = 1[f(z_e) = f(z)] + (1 - d(z_e, z)) - 1[z_e = z];
    fitness_different swaps the first indicator to 1[f(z_e) != f(z)].
    """
    same_label = int(model.predict_label(z)) == int(model.predict_label(z_e))
    return float(_fitness(np.array([same_label]), np.array([distance]),
                          np.array([np.array_equal(z, z_e)]), target)[0])


def _fitness(same_label: np.ndarray, distances: np.ndarray, identical: np.ndarray, target: str) -> np.ndarray:
    if target == SAME:
        indicator = same_label.astype(float)
    elif target == DIFFERENT:
        indicator = (~same_label.astype(bool)).astype(float)
    else:
        raise ConfigError(f"LORE target must be '{SAME}' or '{DIFFERENT}', got '{target}'")
    return indicator + (1.0 - distances) - identical.astype(float)


@dataclass(frozen=True)
class GeneticResult:
    population: np.ndarray
    fitness: np.ndarray
    best_history: List[float]


class GeneticSearch:
    """One GA instance maximising fitness_same or fitness_different"""

    def __init__(self, model, data: Dataset, z_e: np.ndarray, cfg: LoreConfig, target: str):
        """
        Initialize GeneticSearch

        Args:
            model: Black box
            data: Training data (mutation marginals, distance ranges)
            z_e: Instance to explain
            cfg: LoreConfig
            target: 'same' or 'different'
        """
        self.model = model
        self.data = data
        self.z_e = z_e
        self.cfg = cfg
        self.target = target
        self.own_label = int(model.predict_label(z_e))
        self.categorical = np.array([m.kind == CATEGORICAL for m in data.feature_meta])
        self.jitter = JITTER_FRACTION * data.stds()

    def evaluate(self, population: np.ndarray) -> np.ndarray:
        labels = np.asarray(self.model.predict_label(population))
        distances = lore_distances(population, self.z_e, self.data.feature_meta)
        identical = np.all(population == self.z_e, axis=1)
        return _fitness(labels == self.own_label, distances, identical, self.target)

    def _tournament(self, rng: np.random.Generator, fitness: np.ndarray) -> int:
        contenders = rng.integers(0, fitness.shape[0], size=self.cfg.tournament_size)
        # first contender wins ties
        return int(contenders[np.argmax(fitness[contenders])])

    def _mutate(self, rng: np.random.Generator, child: np.ndarray) -> np.ndarray:
        d = child.shape[0]
        mutate = rng.uniform(size=d) < self.cfg.mutation_prob
        donors = rng.integers(0, self.data.n, size=d)
        noise = rng.normal(size=d) * self.jitter
        for j in np.flatnonzero(mutate):
            value = self.data.rows[donors[j], j]
            child[j] = value if self.categorical[j] else value + noise[j]
        return child

    def run(self, rng: np.random.Generator) -> GeneticResult:
        cfg = self.cfg
        d = self.z_e.shape[0]
        population = np.tile(self.z_e, (cfg.population, 1))
        fitness = self.evaluate(population)
        best_history = [float(fitness.max())]

        for _ in range(cfg.generations):
            order = np.argsort(-fitness, kind='stable')
            elites = population[order[:cfg.elitism]]
            children = []
            while len(children) < cfg.population - cfg.elitism:
                mother = population[self._tournament(rng, fitness)].copy()
                father = population[self._tournament(rng, fitness)].copy()
                if rng.uniform() < cfg.crossover_prob:
                    swap = rng.uniform(size=d) < 0.5
                    mother[swap], father[swap] = father[swap], mother[swap].copy()
                children.append(self._mutate(rng, mother))
                if len(children) < cfg.population - cfg.elitism:
                    children.append(self._mutate(rng, father))
            offspring = np.array(children).reshape(-1, d)
            population = np.vstack([elites, offspring])
            fitness = np.concatenate([fitness[order[:cfg.elitism]], self.evaluate(offspring)])
            best_history.append(float(fitness.max()))

        return GeneticResult(population=population, fitness=fitness, best_history=best_history)


def lore_neighbourhood(model, data: Dataset, z_e: np.ndarray, cfg: LoreConfig, seed: int) -> Neighbourhood:
    """
    Two GA runs (same class, other class), each truncated to size/2 fittest individuals.

    If the other-class run never reaches the opposite class, the neighbourhood is
    returned anyway with the 'single_class' flag and a warning.
    """
    ensure_valid(validate_lore_config(cfg))
    rng = np.random.default_rng(seed)
    half = cfg.size // 2

    halves = []
    histories = {}
    for target in (SAME, DIFFERENT):
        result = GeneticSearch(model, data, z_e, cfg, target).run(rng)
        order = np.argsort(-result.fitness, kind='stable')[:half]
        halves.append(result.population[order])
        histories[target] = result.best_history

    points = np.vstack(halves)
    nb = label_neighbourhood(model, points, 'lore', seed, weights=None,
                             diagnostics={'best_fitness': histories})
    flags = ()
    if np.all(nb.bb_labels == nb.bb_labels[0]):
        print(f"⚠️  LORE: other-class search found no opposite-class instance after {cfg.generations} generations")
        flags = ('single_class',)
    return Neighbourhood(points=nb.points, weights=None, bb_labels=nb.bb_labels, bb_probas=nb.bb_probas,
                         strategy_id='lore', seed=seed, flags=flags, diagnostics=nb.diagnostics)
