"""Run configuration: one YAML file drives every stage.

Endpoint URLs and auth tokens can be overridden without touching the file
via FACTRAG_EMBED_URL, FACTRAG_EMBED_TOKEN and FACTRAG_LLM_URL.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .embed import EmbedderConfig
from .fewshot import Bm25Params, TrainSetFormat
from .ingest import ChunkingParams
from .labels import REFUTED
from .llm import LlmConfig
from .retrieve import RetrievalParams

ENV_EMBED_URL = "FACTRAG_EMBED_URL"
ENV_EMBED_TOKEN = "FACTRAG_EMBED_TOKEN"
ENV_LLM_URL = "FACTRAG_LLM_URL"


class ConfigError(Exception):
    """Unreadable config file or references to paths that do not exist."""


@dataclass
class RunPaths:
    claims_file: Path
    knowledge_store_dir: Path
    stores_dir: Path
    output_file: Path
    train_file: Path | None = None


@dataclass
class ClaimsFormat:
    """Field names of the claims/gold file; releases vary, so configurable."""

    id_field: str = "claim_id"
    text_field: str = "claim"
    speaker_field: str = "speaker"
    date_field: str = "claim_date"
    label_field: str = "label"


@dataclass
class KnowledgeFormat:
    url_field: str = "url"
    text_field: str = "url2text"


@dataclass
class RunConfig:
    paths: RunPaths
    chunking: ChunkingParams = field(default_factory=ChunkingParams)
    retrieval: RetrievalParams = field(default_factory=RetrievalParams)
    fewshot: Bm25Params = field(default_factory=Bm25Params)
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    claims_format: ClaimsFormat = field(default_factory=ClaimsFormat)
    knowledge_format: KnowledgeFormat = field(default_factory=KnowledgeFormat)
    train_format: TrainSetFormat = field(default_factory=TrainSetFormat)
    workers: int = 4
    llm_concurrency: int = 1
    per_claim_budget_s: float = 60.0
    fallback_label: str = REFUTED
    include_claim_metadata: bool = False

    def validate_paths(self) -> None:
        """Inputs must exist before a run starts; output dirs are created."""
        if not self.paths.claims_file.exists():
            raise ConfigError(f"claims file not found: {self.paths.claims_file}")
        if not self.paths.knowledge_store_dir.is_dir():
            raise ConfigError(
                f"knowledge-store dir not found: {self.paths.knowledge_store_dir}"
            )
        if self.paths.train_file is not None and not self.paths.train_file.exists():
            raise ConfigError(f"train file not found: {self.paths.train_file}")
        self.paths.stores_dir.mkdir(parents=True, exist_ok=True)
        self.paths.output_file.parent.mkdir(parents=True, exist_ok=True)


def _section(data: dict, name: str) -> dict:
    value = data.get(name) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"config section '{name}' must be a mapping")
    return dict(value)


def _build(cls, data: dict, aliases: dict[str, str] | None = None):
    for alias, target in (aliases or {}).items():
        if alias in data:
            data[target] = data.pop(alias)
    known = set(cls.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {cls.__name__}: {exc}") from exc


def load_config(path: str | Path, env: dict[str, str] | None = None) -> RunConfig:
    """Parse the YAML config, apply env overrides, resolve relative paths
    against the config file's directory."""
    path = Path(path)
    env = os.environ if env is None else env
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot load config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} is not a mapping")

    base = path.parent

    raw_paths = _section(data, "paths")
    required = ("claims_file", "knowledge_store_dir", "stores_dir", "output_file")
    missing = [key for key in required if not raw_paths.get(key)]
    if missing:
        raise ConfigError(f"config paths section is missing: {missing}")
    paths = RunPaths(
        claims_file=base / raw_paths["claims_file"],
        knowledge_store_dir=base / raw_paths["knowledge_store_dir"],
        stores_dir=base / raw_paths["stores_dir"],
        output_file=base / raw_paths["output_file"],
        train_file=(base / raw_paths["train_file"]) if raw_paths.get("train_file") else None,
    )

    embedder_data = _section(data, "embedder")
    if env.get(ENV_EMBED_URL):
        embedder_data["endpoint_url"] = env[ENV_EMBED_URL]
    if env.get(ENV_EMBED_TOKEN):
        embedder_data["auth_token"] = env[ENV_EMBED_TOKEN]
    llm_data = _section(data, "llm")
    if env.get(ENV_LLM_URL):
        llm_data["endpoint_url"] = env[ENV_LLM_URL]

    retrieval_aliases = {"k": "n_candidates", "l": "n_sources", "lambda": "mmr_lambda"}
    config = RunConfig(
        paths=paths,
        chunking=_build(ChunkingParams, _section(data, "chunking")),
        retrieval=_build(RetrievalParams, _section(data, "retrieval"), retrieval_aliases),
        fewshot=_build(Bm25Params, _section(data, "fewshot")),
        embedder=_build(EmbedderConfig, embedder_data),
        llm=_build(LlmConfig, llm_data),
        claims_format=_build(ClaimsFormat, _section(data, "claims_format")),
        knowledge_format=_build(KnowledgeFormat, _section(data, "knowledge_format")),
        train_format=_build(TrainSetFormat, _section(data, "train_format")),
        workers=int(data.get("workers", 4)),
        llm_concurrency=int(data.get("llm_concurrency", 1)),
        per_claim_budget_s=float(data.get("per_claim_budget_s", 60.0)),
        fallback_label=str(data.get("fallback_label", REFUTED)),
        include_claim_metadata=bool(data.get("include_claim_metadata", False)),
    )
    if config.workers < 1:
        raise ConfigError("workers must be >= 1")
    return config
