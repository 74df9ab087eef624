"""
Run configuration: one JSON document whose field tree mirrors `Config`.
An empty document reproduces every default.
"""

import json
import logging
import os
from pathlib import Path

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

from exploitation.losses import LossConfig
from exploitation.net import ModelConfig
from exploration.expansion import ExpansionConfig
from exploration.topic import TopicConfig

load_dotenv()

logger = logging.getLogger(__name__)


class PathsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    train: str | None = None
    valid: str | None = None
    test: str | None = None
    embeddings: str | None = None
    topic_corpora: list[str] = Field(default_factory=list)


class Config(BaseModel):
    model_config = ConfigDict(extra="forbid")

    paths: PathsConfig = Field(default_factory=PathsConfig)
    topic: TopicConfig = Field(default_factory=TopicConfig)
    expansion: ExpansionConfig = Field(default_factory=ExpansionConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    losses: LossConfig = Field(default_factory=LossConfig)
    seed: int = 42


# Ablation ladder, cheapest first
VARIANTS: dict[str, dict] = {
    "ped": {"model": {"use_expansion": False}, "losses": {"gamma1": 0.0, "gamma2": 0.0}},
    "ped+pe": {"model": {"use_expansion": True}, "losses": {"gamma1": 0.0, "gamma2": 0.0}},
    "ped+pe+p-bows": {"model": {"use_expansion": True}, "losses": {"gamma1": 0.0}},
    "ped+pe+p-match": {"model": {"use_expansion": True}, "losses": {"gamma2": 0.0}},
    "pee": {},
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def apply_overrides(cfg: Config, overrides: dict) -> Config:
    return Config.model_validate(_merge(cfg.model_dump(), overrides))


def apply_variant(cfg: Config, variant: str) -> Config:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {', '.join(VARIANTS)}")
    return apply_overrides(cfg, VARIANTS[variant])


def load_config(path: str | None = None, seed: int | None = None) -> Config:
    """
    Reads `path` (or $PEE_CONFIG). Seed precedence: the `seed` argument, then
    $PEE_SEED, then the file.
    """
    path = path or os.getenv("PEE_CONFIG")
    if path:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        logger.info("[CONFIG] loaded %s", path)
    else:
        raw = {}
    cfg = Config.model_validate(raw)

    env_seed = os.getenv("PEE_SEED")
    if seed is not None:
        cfg.seed = seed
    elif env_seed:
        cfg.seed = int(env_seed)
    return cfg
