"""Server configuration file (JSON).

Keys (all optional except `catalogue`):

    catalogue        path to the endpoint registry JSON
    cache_dir        VoID cache directory (default: next to the catalogue)
    cache_ttl        seconds a cached VoID stays valid (default: forever)
    transport        "stdio" or "http"
    host, port       HTTP listen address (default 127.0.0.1:8808)
    result_cap       rows returned inline by run_sparql_query (default 1000)
    default_timeout  seconds when a call does not pass timeout_seconds (default 30)
    strategy         join strategy, "hash" or "bound" (default "hash")

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional


class ConfigError(ValueError):
    pass


@dataclass
class ServerConfig:
    catalogue: str
    cache_dir: Optional[str] = None
    cache_ttl: Optional[float] = None
    transport: str = "stdio"
    host: str = "127.0.0.1"
    port: int = 8808
    result_cap: int = 1000
    default_timeout: int = 30
    strategy: str = "hash"

    def __post_init__(self):
        if self.transport not in ("stdio", "http"):
            raise ConfigError(f"transport must be 'stdio' or 'http', not {self.transport!r}")
        if self.strategy not in ("hash", "bound"):
            raise ConfigError(f"strategy must be 'hash' or 'bound', not {self.strategy!r}")
        if self.result_cap < 1 or self.default_timeout < 1:
            raise ConfigError("result_cap and default_timeout must be positive")


def load_config(path: str | Path) -> ServerConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "catalogue" not in doc:
        raise ConfigError("config must be a JSON object with a 'catalogue' key")
    known = {f.name for f in fields(ServerConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in ("catalogue", "cache_dir"):
        if doc.get(key):
            doc[key] = str((path.parent / doc[key]).resolve())
    return ServerConfig(**doc)


def build_server(config: ServerConfig):
    from ..catalogue import Catalogue
    from .server import McpServer
    catalogue = Catalogue(config.catalogue, config.cache_dir, config.cache_ttl)
    return McpServer(catalogue, result_cap=config.result_cap, default_timeout=config.default_timeout,
                     strategy=config.strategy)
