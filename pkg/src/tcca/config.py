"""Run configuration: one JSON document covering generation, model,
training and evaluation. Unknown keys are rejected so that typos fail fast;
every default is visible in the CLI help (and in configs/default.json).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datagen import GeneratorSpec, orthogonalish_embeddings
from .decoder import DecoderConfig
from .encoder import EncoderConfig


def default_transitions(num_classes: int) -> list[list[float]]:
    """Structured row-stochastic matrix: one dominant successor per class
    plus two weaker alternatives, zero diagonal."""
    weights = ((1, 0.85), (3, 0.12), (6, 0.03))
    matrix = np.zeros((num_classes, num_classes))
    for i in range(num_classes):
        entries = [(offset, w) for offset, w in weights if offset % num_classes != 0]
        total = sum(w for _, w in entries)
        for offset, w in entries:
            matrix[i, (i + offset) % num_classes] += w / total
    return [[float(v) for v in row] for row in matrix]


def default_duration_params(num_classes: int) -> list[list[float]]:
    return [[22.0 + 1.5 * c, 1.5] for c in range(num_classes)]


@dataclass(frozen=True)
class GeneratorConfig:
    num_classes: int = 8
    feature_dim: int = 16
    noise_sigma: float = 0.4
    min_segments: int = 6
    max_segments: int = 9
    seed: int = 7
    n_train: int = 300
    n_test: int = 60
    embedding_scale: float = 1.0
    gt_transitions: list | None = None  # default: structured successor matrix
    duration_params: list | None = None  # default: per-class ramp, std 3
    class_embeddings: list | None = None  # default: seed-derived orthogonal rows

    def to_spec(self) -> GeneratorSpec:
        transitions = self.gt_transitions or default_transitions(self.num_classes)
        durations = self.duration_params or default_duration_params(self.num_classes)
        if self.class_embeddings is not None:
            embeddings = np.asarray(self.class_embeddings, dtype=np.float64)
        else:
            embeddings = orthogonalish_embeddings(
                self.num_classes, self.feature_dim, self.seed, self.embedding_scale
            )
        return GeneratorSpec(
            num_classes=self.num_classes,
            gt_transitions=np.asarray(transitions, dtype=np.float64),
            duration_params=tuple((float(m), float(s)) for m, s in durations),
            feature_dim=self.feature_dim,
            noise_sigma=self.noise_sigma,
            class_embeddings=embeddings,
            min_segments=self.min_segments,
            max_segments=self.max_segments,
            seed=self.seed,
        )


@dataclass(frozen=True)
class CrfConfig:
    omega: float = 1.0
    init_mode: str = "random"  # "random" | "precomputed"

    def __post_init__(self):
        if not np.isfinite(self.omega) or self.omega < 0:
            raise ValueError("omega must be finite and nonnegative")
        if self.init_mode not in ("random", "precomputed"):
            raise ValueError("unknown init_mode")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 1e-3
    warmup_epochs: int = 10
    weight_decay: float = 1e-2
    grad_clip: float = 10.0
    lambda_smooth: float = 0.2
    sample_rate: int = 3
    alpha_set: tuple = (0.2, 0.3, 0.5)
    seed: int = 0
    dtype: str = "float64"  # "float32" trades protocol precision for speed
    use_crf: bool = True
    use_bacr_fut: bool = True
    use_bacr_past: bool = True
    use_smooth: bool = True

    def __post_init__(self):
        if self.lambda_smooth < 0:
            raise ValueError("lambda_smooth must be nonnegative")
        if not all(0 < a < 1 for a in self.alpha_set):
            raise ValueError("alpha_set entries must lie in (0, 1)")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("unknown dtype")


@dataclass(frozen=True)
class EvalConfig:
    alpha_set: tuple = (0.2, 0.3)
    beta_set: tuple = (0.1, 0.2, 0.3, 0.5)


@dataclass(frozen=True)
class RunConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    crf: CrfConfig = field(default_factory=CrfConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)


_SECTIONS = {
    "generator": GeneratorConfig,
    "encoder": EncoderConfig,
    "decoder": DecoderConfig,
    "crf": CrfConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
}


class ConfigError(ValueError):
    pass


def _build_section(cls, data: dict):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} for section {cls.__name__}")
    values = {k: tuple(v) if isinstance(v, list) and k.endswith("_set") else v for k, v in data.items()}
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(data: dict) -> RunConfig:
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    sections = {
        name: _build_section(cls, data.get(name, {})) for name, cls in _SECTIONS.items()
    }
    return RunConfig(**sections)


def load_config(path: Path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(data)


def _normalize(value):
    if isinstance(value, dict):
        return {k: _normalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_normalize(v) for v in value]
    return value


def config_to_dict(cfg: RunConfig) -> dict:
    return _normalize(dataclasses.asdict(cfg))


def config_json(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(config_json(cfg).encode()).hexdigest()


def default_config_json() -> str:
    return json.dumps(config_to_dict(RunConfig()), sort_keys=True, indent=1)
