"""Service and pipeline configuration."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .harvester import KeywordRule, ValueSource
from .retrieval import (
    DEFAULT_CHUNK_OVERLAP,
    DEFAULT_CHUNK_TOKENS,
    DEFAULT_DIMENSION,
    DEFAULT_TOP_K,
)


@dataclass
class ServiceConfig:
    store_path: str | None = None
    port: int = 8000
    embedding_endpoint: str | None = None
    completion_endpoint: str | None = None
    embedding_dimension: int = DEFAULT_DIMENSION
    top_k: int = DEFAULT_TOP_K
    chunk_tokens: int = DEFAULT_CHUNK_TOKENS
    chunk_overlap: int = DEFAULT_CHUNK_OVERLAP
    keyword_rules: list[dict] = field(default_factory=list)

    def extra_rules(self) -> list[KeywordRule]:
        rules = []
        for raw in self.keyword_rules:
            rules.append(
                KeywordRule(
                    pattern=raw["pattern"],
                    target_label=raw["target_label"],
                    edge_type=raw["edge_type"],
                    value_source=ValueSource(raw.get("value_source", "AfterColon")),
                )
            )
        return rules


def load_config(path: str) -> ServiceConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    known = {f for f in ServiceConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return ServiceConfig(**raw)
