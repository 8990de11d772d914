"""Run configuration: built-in defaults < config file < command-line flags."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .agent.state import LoopConfig
from .backends.base import BUILD_TEMPERATURE, BackendConfig, Backends
from .errors import ConfigError
from .memory.types import SegmentationConfig

PROVIDERS = ("openai", "heuristic")
EMBEDDERS = ("remote", "bow", "hash")


@dataclass(frozen=True)
class BuildSection:
    temperature: float = BUILD_TEMPERATURE
    workers: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ConfigError("build.temperature must be in [0, 2]")
        if self.workers < 1:
            raise ConfigError("build.workers must be >= 1")


@dataclass(frozen=True)
class EvalSection:
    workers: int = 1
    output_dir: str = "eval_out"
    mode: str = "agent"

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError("eval.workers must be >= 1")
        if self.mode not in ("agent", "direct"):
            raise ConfigError("eval.mode must be 'agent' or 'direct'")


@dataclass(frozen=True)
class ProviderSection:
    provider: str = "openai"
    embedder: str = "remote"
    embedding_dim: int = 1024
    seed: int = 0

    def __post_init__(self) -> None:
        if self.provider not in PROVIDERS:
            raise ConfigError(f"provider must be one of {PROVIDERS}")
        if self.embedder not in EMBEDDERS:
            raise ConfigError(f"embedder must be one of {EMBEDDERS}")
        if self.embedding_dim < 2:
            raise ConfigError("embedding_dim must be >= 2")


@dataclass(frozen=True)
class RunConfig:
    backend: BackendConfig = field(default_factory=BackendConfig)
    provider: ProviderSection = field(default_factory=ProviderSection)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    loop: LoopConfig = field(default_factory=LoopConfig)
    build: BuildSection = field(default_factory=BuildSection)
    eval: EvalSection = field(default_factory=EvalSection)

    def to_dict(self) -> dict:
        return {f.name: asdict(getattr(self, f.name)) for f in fields(self)}


def _section_types() -> dict[str, type]:
    return {
        "backend": BackendConfig,
        "provider": ProviderSection,
        "segmentation": SegmentationConfig,
        "loop": LoopConfig,
        "build": BuildSection,
        "eval": EvalSection,
    }


def merge(base: RunConfig, overrides: dict, source: str = "overrides") -> RunConfig:
    """Apply ``{section: {key: value}}`` overrides, rejecting unknown keys."""
    if not isinstance(overrides, dict):
        raise ConfigError(f"{source}: expected a mapping of sections")
    data = base.to_dict()
    types = _section_types()
    for section, values in overrides.items():
        if section not in types:
            raise ConfigError(f"{source}: unknown section {section!r}")
        if not isinstance(values, dict):
            raise ConfigError(f"{source}: section {section!r} must be a mapping")
        known = {f.name for f in fields(types[section])}
        for key, value in values.items():
            if key not in known:
                raise ConfigError(f"{source}: unknown key {section}.{key}")
            data[section][key] = value
    try:
        return RunConfig(**{name: types[name](**vals) for name, vals in data.items()})
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML/JSON ({exc})") from exc
        cfg = merge(cfg, raw, str(path))
    if overrides:
        cfg = merge(cfg, copy.deepcopy(overrides), "command line")
    return cfg


def make_backends(cfg: RunConfig) -> Backends:
    """Instantiate chat and embedding clients for ``cfg``."""
    from .backends.heuristic import HeuristicOmniBackend
    from .backends.mock import BagOfWordsEmbedder, HashEmbedder
    from .backends.openai_http import OpenAICompatibleClient

    p = cfg.provider
    remote = None
    if p.provider == "openai":
        remote = OpenAICompatibleClient(cfg.backend)
        chat = remote
    else:
        chat = HeuristicOmniBackend(k=cfg.loop.default_k)
    embedder = p.embedder
    if embedder == "remote" and remote is None:
        embedder = "bow"
    if embedder == "remote":
        embed = remote
    elif embedder == "bow":
        embed = BagOfWordsEmbedder(p.embedding_dim)
    else:
        embed = HashEmbedder(p.embedding_dim, p.seed)
    return Backends(chat=chat, embed=embed)
