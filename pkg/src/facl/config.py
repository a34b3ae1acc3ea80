"""Training/evaluation config schema, YAML loading and seed derivation."""

from dataclasses import asdict, dataclass, field, fields, replace
import hashlib
import json
import zlib

import numpy as np
import yaml

from .errors import ConfigurationError
from .generator import GeneratorConfig, PerturbationBudget
from .losses import LossWeights
from .spectral import BANDS, BandThresholds, RandomizationParams

FEATURE_POOLING = ("flatten", "avgpool")


def derive_seed(root_seed, name):
    """Named sub-seed of ``root_seed`` (stable across processes and platforms)."""
    key = zlib.crc32(str(name).encode())
    return int(np.random.SeedSequence(int(root_seed), spawn_key=(key,)).generate_state(1)[0])


@dataclass(frozen=True)
class TrainConfig:
    """Every knob of one generator training run.

    Defaults follow the published implementation details; ``f_low``/``f_high``
    are stated at ``base_resolution`` and rescaled to the data resolution.
    """

    dataset: str = "shapes"
    surrogate: str = "vgg_shapes"
    batch_size: int = 16
    epochs: int = 1
    max_steps: int | None = None
    learning_rate: float = 2e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    epsilon: float = 10.0
    f_low: int = 7
    f_high: int = 112
    base_resolution: int = 224
    rho: float = 0.01
    sigma: float = 8.0
    jitter_bands: tuple = ("low", "high")
    augment_fraction: float = 0.5
    lambda_orig: float = 1.0
    lambda_facl: float = 1.0
    orig_tap: str = "maxpool3"
    facl_tap: str = "conv4_1"
    feature_pooling: str = "flatten"
    generator_base_width: int = 64
    generator_residual_blocks: int = 6
    seed: int = 0
    checkpoint_every: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "jitter_bands", tuple(self.jitter_bands))
        _check_types(self)
        _check(self.batch_size >= 1, "batch_size", "must be >= 1")
        _check(self.epochs >= 0, "epochs", "must be >= 0")
        _check(self.max_steps is None or self.max_steps >= 0, "max_steps", "must be >= 0 or null")
        _check(self.learning_rate > 0, "learning_rate", "must be > 0")
        _check(0 <= self.adam_beta1 < 1, "adam_beta1", "must lie in [0, 1)")
        _check(0 <= self.adam_beta2 < 1, "adam_beta2", "must lie in [0, 1)")
        _check(self.epsilon > 0, "epsilon", "must be > 0")
        _check(self.base_resolution > 0, "base_resolution", "must be > 0")
        _check(0 <= self.f_low < self.f_high <= self.base_resolution, "f_low/f_high",
               "need 0 <= f_low < f_high <= base_resolution")
        _check(0 <= self.rho < 1, "rho", "must lie in [0, 1)")
        _check(self.sigma >= 0, "sigma", "must be >= 0")
        _check(set(self.jitter_bands) <= set(BANDS), "jitter_bands", f"must be a subset of {BANDS}")
        _check(0 <= self.augment_fraction <= 1, "augment_fraction", "must lie in [0, 1]")
        _check(self.lambda_orig >= 0 and self.lambda_facl >= 0, "lambda_orig/lambda_facl", "must be >= 0")
        _check(self.lambda_orig + self.lambda_facl > 0, "lambda_orig/lambda_facl", "cannot both be 0")
        _check(self.feature_pooling in FEATURE_POOLING, "feature_pooling", f"must be one of {FEATURE_POOLING}")
        _check(self.generator_base_width >= 1, "generator_base_width", "must be >= 1")
        _check(self.generator_residual_blocks >= 0, "generator_residual_blocks", "must be >= 0")
        _check(self.checkpoint_every is None or self.checkpoint_every >= 1, "checkpoint_every", "must be >= 1 or null")

    @property
    def thresholds(self):
        return BandThresholds(self.f_low, self.f_high, self.base_resolution)

    @property
    def randomization(self):
        return RandomizationParams(self.rho, self.sigma, derive_seed(self.seed, "augmentation"), self.jitter_bands)

    @property
    def augmentation_enabled(self):
        return self.rho > 0 or self.sigma > 0

    @property
    def budget(self):
        return PerturbationBudget(self.epsilon)

    @property
    def weights(self):
        return LossWeights(self.lambda_orig, self.lambda_facl)

    def generator_config(self, resolution):
        return GeneratorConfig(3, self.generator_base_width, self.generator_residual_blocks, resolution)

    def to_dict(self):
        d = asdict(self)
        d["jitter_bands"] = list(self.jitter_bands)
        return d

    def hash(self):
        return config_hash(self.to_dict())

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class AblationConfig:
    """A base training config crossed with variants, victims and seeds."""

    train: TrainConfig = field(default_factory=TrainConfig)
    variants: tuple = ("baseline", "fadr_only", "facl_only", "full",
                       "low_rand", "mid_rand", "high_rand", "all_rand")
    victims: tuple = ("resnet_shapes", "densenet_shapes", "resnet_glyphs", "densenet_glyphs")
    seeds: tuple = (0,)
    eval_limit: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "variants", tuple(self.variants))
        object.__setattr__(self, "victims", tuple(self.victims))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        _check(len(self.variants) > 0, "variants", "must not be empty")
        _check(len(self.victims) > 0, "victims", "must not be empty")
        _check(len(self.seeds) > 0, "seeds", "must not be empty")

    def to_dict(self):
        return {"train": self.train.to_dict(), "variants": list(self.variants),
                "victims": list(self.victims), "seeds": list(self.seeds), "eval_limit": self.eval_limit}

    def hash(self):
        return config_hash(self.to_dict())


def _check(ok, key, constraint):
    if not ok:
        raise ConfigurationError(f"invalid config key {key!r}: {constraint}")


_NUMERIC = {int: (int,), float: (int, float)}


def _check_types(cfg):
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None and "None" in str(f.type):
            continue
        base = int if "int" in str(f.type) else float if "float" in str(f.type) else None
        if base is not None:
            ok = isinstance(value, _NUMERIC[base]) and not isinstance(value, bool)
            _check(ok, f.name, f"must be a number of type {base.__name__}, got {value!r}")
        elif f.type is str:
            _check(isinstance(value, str), f.name, f"must be a string, got {value!r}")


def config_hash(d):
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _from_mapping(cls, data):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"unknown config key(s) {unknown} for {cls.__name__}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def train_config_from_dict(data):
    return _from_mapping(TrainConfig, data)


def ablation_config_from_dict(data):
    data = dict(data or {})
    train = train_config_from_dict(data.pop("train", {}))
    return _from_mapping(AblationConfig, {**data, "train": train})


def _read_yaml(path):
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{path}: not valid YAML ({exc})") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return data


def load_config(path, kind="train"):
    """Load and validate a YAML config file; an empty file gives all defaults.

    ``kind`` is ``"train"`` or ``"ablation"``.
    """
    data = _read_yaml(path)
    if kind == "train":
        return train_config_from_dict(data)
    if kind == "ablation":
        return ablation_config_from_dict(data)
    raise ConfigurationError(f"unknown config kind {kind!r}")


def dump_config(config, path):
    """Write the resolved config as YAML so that :func:`load_config` round-trips it."""
    with open(path, "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=True)
