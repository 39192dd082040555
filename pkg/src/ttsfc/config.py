"""File-based application configuration.

A TOML file (default ./ttsfc.toml) supplies endpoint base URLs, sampling
defaults, BM25 parameters, strategy defaults, and template paths. Every
file the config references must exist at load time, and URLs must be
well-formed. Secrets never live here: API keys come from environment
variables (CHAT_API_KEY, EMBEDDINGS_API_KEY, SCORE_API_KEY).
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import urlparse

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_CONFIG_PATH = "ttsfc.toml"


@dataclass(frozen=True)
class AppConfig:
    chat_url: str | None = None
    embeddings_url: str | None = None
    score_url: str | None = None
    model: str = "gpt-4o-mini"
    embedding_model: str = "paraphrase-minilm-l6-v2"
    temperature: float = 0.45
    m: int = 10
    max_tokens: int = 1024
    seed: int | None = None
    k1: float = 1.2
    b: float = 0.75
    level0_m: int = 1
    with_decomposition: bool = False
    template_path: str | None = None
    decomposition_template_path: str | None = None
    judge_template_path: str | None = None

    def __post_init__(self):
        for name in ("chat_url", "embeddings_url", "score_url"):
            url = getattr(self, name)
            if url is not None:
                parsed = urlparse(url)
                if parsed.scheme not in ("http", "https") or not parsed.netloc:
                    raise ConfigError(f"{name} is not a valid http(s) URL: {url!r}")
        for name in ("template_path", "decomposition_template_path",
                     "judge_template_path"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{name} does not exist: {path!r}")


def load_config(path: str | Path | None = None) -> AppConfig:
    """Load config from `path`, or defaults when the default file is absent.

    An explicitly given path must exist; the implicit ./ttsfc.toml may not.
    """
    explicit = path is not None
    path = Path(path or DEFAULT_CONFIG_PATH)
    if not path.is_file():
        if explicit:
            raise ConfigError(f"config file not found: {path}")
        return AppConfig()
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML ({exc})") from exc

    endpoints = raw.get("endpoints", {})
    sampling = raw.get("sampling", {})
    bm25 = raw.get("bm25", {})
    strategy = raw.get("strategy", {})
    templates = raw.get("templates", {})
    try:
        return AppConfig(
            chat_url=endpoints.get("chat"),
            embeddings_url=endpoints.get("embeddings"),
            score_url=endpoints.get("score"),
            model=sampling.get("model", "gpt-4o-mini"),
            embedding_model=sampling.get("embedding_model", "paraphrase-minilm-l6-v2"),
            temperature=sampling.get("temperature", 0.45),
            m=sampling.get("m", 10),
            max_tokens=sampling.get("max_tokens", 1024),
            seed=sampling.get("seed"),
            k1=bm25.get("k1", 1.2),
            b=bm25.get("b", 0.75),
            level0_m=strategy.get("level0_m", 1),
            with_decomposition=strategy.get("with_decomposition", False),
            template_path=templates.get("fact_checking"),
            decomposition_template_path=templates.get("decomposition"),
            judge_template_path=templates.get("judge_drift"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad config value ({exc})") from exc
