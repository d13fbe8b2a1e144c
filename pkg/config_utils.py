"""
Config Utilities Module
Handles run configuration: typed sections, JSON files, flag overrides and digests
"""
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

from domain_types import STRATEGY_IDS
from error_utils import ConfigError

CONFIG_ENV_VAR = 'SURROGATE_LAB_CONFIG'

AUTO = 'auto'

# Root seed + fixed offset gives each strategy its own reproducible stream
STRATEGY_SEED_OFFSETS = {
    'lime': 0,
    'gsls': 1000,
    'lore': 2000,
    'leap': 3000,
    'kernelshap': 4000,
    'palex': 5000,
}

DEFAULT_SURROGATES = {
    'lime': 'ridge',
    'gsls': 'tree',
    'lore': 'tree',
    'leap': 'ridge',
    'kernelshap': 'shapley',
    'palex': 'ridge',
}

SURROGATE_KINDS = ('ridge', 'tree', 'shapley')


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_count(value: Any, minimum: int = 1) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value >= minimum


def _is_positive(value: Any) -> bool:
    return _is_number(value) and value > 0


def _is_auto_or_positive(value: Any) -> bool:
    return value == AUTO or _is_positive(value)


def _is_probability(value: Any) -> bool:
    return _is_number(value) and 0.0 <= value <= 1.0


@dataclass(frozen=True)
class HalfMoonsSpec:
    n: int = 1000
    noise: float = 0.2
    seed: int = 0


@dataclass(frozen=True)
class TrainConfig:
    hidden: int = 16
    epochs: int = 5000
    learning_rate: float = 0.5
    seed: int = 0


@dataclass(frozen=True)
class LimeConfig:
    sample_count: int = 5000
    sigma: Union[str, List[float]] = AUTO
    gamma: Union[str, float] = AUTO


@dataclass(frozen=True)
class GslsConfig:
    radius: Union[str, float] = AUTO
    sample_count: int = 5000
    eta: Union[str, float] = AUTO
    max_radius: Union[str, float] = AUTO
    layer_samples: int = 200


@dataclass(frozen=True)
class LoreConfig:
    size: int = 200
    population: int = 200
    generations: int = 20
    crossover_prob: float = 0.5
    mutation_prob: float = 0.2
    tournament_size: int = 3
    elitism: int = 2


@dataclass(frozen=True)
class LeapConfig:
    k_lid: int = 20
    k_pca: int = 100
    sample_count: int = 5000
    sigma: Union[str, float] = AUTO
    gamma: Union[str, float] = AUTO


@dataclass(frozen=True)
class KernelShapConfig:
    background_size: Optional[int] = None
    kmeans_iterations: int = 50
    enumeration_cap: int = 12
    sample_count: Optional[int] = None


@dataclass(frozen=True)
class PalexConfig:
    sample_count: int = 5000
    min_support: float = 0.05
    max_length: int = 4
    bins: int = 4
    weight_map: str = 'exp'


@dataclass(frozen=True)
class SurrogateConfig:
    kind: Optional[str] = None
    ridge_lambda: float = 1e-6
    max_depth: int = 3
    min_leaf_weight: float = 0.01


@dataclass(frozen=True)
class RenderConfig:
    resolution: int = 200
    panel_size: int = 320


def validate_half_moons_spec(spec: HalfMoonsSpec) -> Tuple[bool, str]:
    if not _is_count(spec.n, 2):
        return (False, 'data.n must be an integer >= 2')
    if not _is_number(spec.noise) or spec.noise < 0:
        return (False, 'data.noise must be a non-negative real')
    return (True, '')


def validate_train_config(cfg: TrainConfig) -> Tuple[bool, str]:
    if not _is_count(cfg.hidden):
        return (False, 'train.hidden must be an integer >= 1')
    if not _is_count(cfg.epochs):
        return (False, 'train.epochs must be an integer >= 1')
    if not _is_positive(cfg.learning_rate):
        return (False, 'train.learning_rate must be > 0')
    return (True, '')


def validate_lime_config(cfg: LimeConfig, d: Optional[int] = None) -> Tuple[bool, str]:
    if not _is_count(cfg.sample_count):
        return (False, 'lime.sample_count must be an integer >= 1')
    if cfg.sigma != AUTO:
        if not isinstance(cfg.sigma, (list, tuple)) or not all(_is_positive(s) for s in cfg.sigma):
            return (False, "lime.sigma must be 'auto' or a list of positive reals")
        if d is not None and len(cfg.sigma) != d:
            return (False, f'lime.sigma has {len(cfg.sigma)} entries, expected {d}')
    if not _is_auto_or_positive(cfg.gamma):
        return (False, "lime.gamma must be 'auto' or > 0")
    return (True, '')


def validate_gsls_config(cfg: GslsConfig) -> Tuple[bool, str]:
    for name in ('radius', 'eta', 'max_radius'):
        if not _is_auto_or_positive(getattr(cfg, name)):
            return (False, f"gsls.{name} must be 'auto' or > 0")
    if not _is_count(cfg.sample_count):
        return (False, 'gsls.sample_count must be an integer >= 1')
    if not _is_count(cfg.layer_samples):
        return (False, 'gsls.layer_samples must be an integer >= 1')
    if _is_number(cfg.eta) and _is_number(cfg.max_radius) and cfg.max_radius < cfg.eta:
        return (False, 'gsls.max_radius must be >= gsls.eta')
    return (True, '')


def validate_lore_config(cfg: LoreConfig) -> Tuple[bool, str]:
    if not _is_count(cfg.size, 2) or cfg.size % 2 != 0:
        return (False, 'lore.size must be an even integer >= 2')
    if not _is_count(cfg.population, 2):
        return (False, 'lore.population must be an integer >= 2')
    if cfg.population < cfg.size // 2:
        return (False, 'lore.population must be >= lore.size / 2')
    if not _is_count(cfg.generations, 0):
        return (False, 'lore.generations must be a non-negative integer')
    if not _is_probability(cfg.crossover_prob) or not _is_probability(cfg.mutation_prob):
        return (False, 'lore.crossover_prob and lore.mutation_prob must lie in [0, 1]')
    if not _is_count(cfg.tournament_size):
        return (False, 'lore.tournament_size must be an integer >= 1')
    if not _is_count(cfg.elitism, 0) or cfg.elitism > cfg.population:
        return (False, 'lore.elitism must be an integer in [0, population]')
    return (True, '')


def validate_leap_config(cfg: LeapConfig, n: Optional[int] = None) -> Tuple[bool, str]:
    if not _is_count(cfg.k_lid, 2):
        return (False, 'leap.k_lid must be an integer >= 2')
    if n is not None and cfg.k_lid > n:
        return (False, f'leap.k_lid ({cfg.k_lid}) exceeds the number of training rows ({n})')
    if not _is_count(cfg.k_pca):
        return (False, 'leap.k_pca must be an integer >= 1')
    if not _is_count(cfg.sample_count):
        return (False, 'leap.sample_count must be an integer >= 1')
    if not _is_auto_or_positive(cfg.sigma) or not _is_auto_or_positive(cfg.gamma):
        return (False, "leap.sigma and leap.gamma must be 'auto' or > 0")
    return (True, '')


def validate_kernelshap_config(cfg: KernelShapConfig) -> Tuple[bool, str]:
    if cfg.background_size is not None and not _is_count(cfg.background_size):
        return (False, 'kernelshap.background_size must be null or an integer >= 1')
    if not _is_count(cfg.kmeans_iterations):
        return (False, 'kernelshap.kmeans_iterations must be an integer >= 1')
    if not _is_count(cfg.enumeration_cap, 2):
        return (False, 'kernelshap.enumeration_cap must be an integer >= 2')
    if cfg.sample_count is not None and not _is_count(cfg.sample_count):
        return (False, 'kernelshap.sample_count must be null or an integer >= 1')
    return (True, '')


def validate_palex_config(cfg: PalexConfig) -> Tuple[bool, str]:
    if not _is_count(cfg.sample_count):
        return (False, 'palex.sample_count must be an integer >= 1')
    if not _is_number(cfg.min_support) or not 0.0 < cfg.min_support <= 1.0:
        return (False, 'palex.min_support must lie in (0, 1]')
    if not _is_count(cfg.max_length):
        return (False, 'palex.max_length must be an integer >= 1')
    if not _is_count(cfg.bins, 2):
        return (False, 'palex.bins must be an integer >= 2')
    if cfg.weight_map not in ('exp', 'inverse'):
        return (False, "palex.weight_map must be 'exp' or 'inverse'")
    return (True, '')


def validate_surrogate_config(cfg: SurrogateConfig) -> Tuple[bool, str]:
    if cfg.kind is not None and cfg.kind not in SURROGATE_KINDS:
        return (False, f"surrogate.kind must be one of {', '.join(SURROGATE_KINDS)} or null")
    if not _is_number(cfg.ridge_lambda) or cfg.ridge_lambda < 0:
        return (False, 'surrogate.ridge_lambda must be >= 0')
    if not _is_count(cfg.max_depth):
        return (False, 'surrogate.max_depth must be an integer >= 1')
    if not _is_number(cfg.min_leaf_weight) or not 0.0 <= cfg.min_leaf_weight < 1.0:
        return (False, 'surrogate.min_leaf_weight must lie in [0, 1)')
    return (True, '')


def validate_render_config(cfg: RenderConfig) -> Tuple[bool, str]:
    if not _is_count(cfg.resolution, 2):
        return (False, 'render.resolution must be an integer >= 2')
    if not _is_count(cfg.panel_size, 50):
        return (False, 'render.panel_size must be an integer >= 50')
    return (True, '')


SECTIONS = {
    'data': (HalfMoonsSpec, validate_half_moons_spec),
    'train': (TrainConfig, validate_train_config),
    'lime': (LimeConfig, validate_lime_config),
    'gsls': (GslsConfig, validate_gsls_config),
    'lore': (LoreConfig, validate_lore_config),
    'leap': (LeapConfig, validate_leap_config),
    'kernelshap': (KernelShapConfig, validate_kernelshap_config),
    'palex': (PalexConfig, validate_palex_config),
    'surrogate': (SurrogateConfig, validate_surrogate_config),
    'render': (RenderConfig, validate_render_config),
}


def ensure_valid(result: Tuple[bool, str]):
    """Raise ConfigError for a failed (is_valid, error_message) check"""
    is_valid, error_msg = result
    if not is_valid:
        raise ConfigError(error_msg)


@dataclass(frozen=True)
class RunConfig:
    """Effective configuration of a run: every section plus the root seed"""
    data: HalfMoonsSpec = field(default_factory=HalfMoonsSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    lime: LimeConfig = field(default_factory=LimeConfig)
    gsls: GslsConfig = field(default_factory=GslsConfig)
    lore: LoreConfig = field(default_factory=LoreConfig)
    leap: LeapConfig = field(default_factory=LeapConfig)
    kernelshap: KernelShapConfig = field(default_factory=KernelShapConfig)
    palex: PalexConfig = field(default_factory=PalexConfig)
    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    seed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> 'RunConfig':
        """
        Build a RunConfig from a (possibly partial) nested dict.

        Raises:
            ConfigError: On unknown sections, unknown keys or invalid values
        """
        if not isinstance(doc, dict):
            raise ConfigError('Config document must be a JSON object')
        kwargs: Dict[str, Any] = {}
        for section, values in doc.items():
            if section == 'seed':
                if not isinstance(values, int) or isinstance(values, bool):
                    raise ConfigError('seed must be an integer')
                kwargs['seed'] = values
                continue
            if section not in SECTIONS:
                raise ConfigError(f"Unknown config section '{section}'")
            if not isinstance(values, dict):
                raise ConfigError(f"Config section '{section}' must be an object")
            section_cls, validator = SECTIONS[section]
            known = {f.name for f in dataclasses.fields(section_cls)}
            unknown = sorted(set(values) - known)
            if unknown:
                raise ConfigError(f"Unknown key(s) in section '{section}': {', '.join(unknown)}")
            section_cfg = section_cls(**values)
            ensure_valid(validator(section_cfg))
            kwargs[section] = section_cfg
        return cls(**kwargs)

    def digest(self) -> str:
        return config_digest(self.to_dict())


def config_digest(doc: Dict[str, Any]) -> str:
    """SHA-256 hex digest of the canonical JSON form of a config dict"""
    canonical = json.dumps(doc, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode()).hexdigest()


def strategy_seed(seed: int, method: str) -> int:
    """Per-strategy sub-seed derived from the root seed"""
    if method not in STRATEGY_SEED_OFFSETS:
        raise ConfigError(f"Unknown method '{method}'. Valid methods: {', '.join(STRATEGY_IDS)}")
    return seed + STRATEGY_SEED_OFFSETS[method]


def surrogate_kind_for(method: str, cfg: SurrogateConfig) -> str:
    return cfg.kind if cfg.kind is not None else DEFAULT_SURROGATES[method]


def parse_override_value(text: str) -> Any:
    """Parse a flag value: JSON literals (numbers, null, lists) or a bare string"""
    try:
        return json.loads(text)
    except (json.JSONDecodeError, TypeError):
        return text


def override_flag_names() -> List[Tuple[str, str, str]]:
    """(section, field, --flag-name) for every overridable field"""
    names = []
    for section, (section_cls, _) in SECTIONS.items():
        for f in dataclasses.fields(section_cls):
            flag = f"--{section}-{f.name.replace('_', '-')}"
            names.append((section, f.name, flag))
    return names


def add_override_flags(parser):
    """Register a --<section>-<field> flag for every config field on an argparse parser"""
    group = parser.add_argument_group('config overrides')
    for section, name, flag in override_flag_names():
        group.add_argument(flag, dest=f'override__{section}__{name}', default=None,
                           metavar='VALUE', help=f'override {section}.{name}')


def collect_overrides(args) -> Dict[str, Dict[str, Any]]:
    """Extract the overrides given on the command line into a nested dict"""
    overrides: Dict[str, Dict[str, Any]] = {}
    for section, name, _ in override_flag_names():
        raw = getattr(args, f'override__{section}__{name}', None)
        if raw is not None:
            overrides.setdefault(section, {})[name] = parse_override_value(raw)
    return overrides


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    """
    Read a JSON config file.

    Args:
        path: Explicit path, or None to fall back to the SURROGATE_LAB_CONFIG env var

    Returns:
        Parsed dict (empty when no file is configured)
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or None
    if path is None:
        return {}
    if not os.path.exists(path):
        raise ConfigError(f'Config file not found: {path}')
    try:
        with open(path, 'r') as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f'Config file {path} is not valid JSON: {e}')
    if not isinstance(doc, dict):
        raise ConfigError(f'Config file {path} must hold a JSON object')
    return doc


def merge_config(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Merge section-wise: override values replace base values key by key"""
    merged = {k: (dict(v) if isinstance(v, dict) else v) for k, v in base.items()}
    for section, values in overrides.items():
        if isinstance(values, dict) and isinstance(merged.get(section), dict):
            merged[section].update(values)
        else:
            merged[section] = values
    return merged


def resolve_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None,
                   seed: Optional[int] = None) -> RunConfig:
    """
    Resolve the effective RunConfig: defaults, then file, then flag overrides.

    Args:
        path: Config file path (or None for the env var / no file)
        overrides: Nested dict of flag overrides
        seed: Root seed override

    Returns:
        Validated RunConfig
    """
    doc = merge_config(load_config_file(path), overrides or {})
    if seed is not None:
        doc['seed'] = seed
    return RunConfig.from_dict(doc)
