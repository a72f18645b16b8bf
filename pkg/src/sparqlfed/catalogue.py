"""Endpoint registry with a file-based VoID cache.

Layout on disk::

    <registry>.json            endpoints, labels, descriptions, capabilities, cache timestamps
    <cache_dir>/<sha>.ttl      standard VoID description of one endpoint
    <cache_dir>/<sha>.ext.ttl  extended variant (with linksets)

`<sha>` is the first 16 hex digits of SHA-256 over the endpoint URL.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .client import Capabilities, SparqlClient, check_endpoint_url
from .turtle import parse_turtle, serialize_turtle
from .void import PREFIXES, VoidDescription, compute_linksets, compute_void, retrieve_void

log = logging.getLogger(__name__)


class CatalogueError(Exception):
    pass


class DuplicateEndpoint(CatalogueError):
    pass


class UnknownEndpoint(CatalogueError):
    pass


@dataclass
class CatalogueEntry:
    url: str
    label: str = ""
    description: str = ""
    capabilities: Optional[dict] = None
    void_cached_at: dict = field(default_factory=dict)  # "standard"/"extended" -> epoch seconds

    def to_json(self) -> dict:
        return asdict(self)


def url_digest(url: str) -> str:
    return hashlib.sha256(url.encode("utf-8")).hexdigest()[:16]


class Catalogue:
    """Single-writer, multi-reader registry; every mutation is persisted at once."""

    def __init__(self, path: str | Path, cache_dir: str | Path | None = None, ttl: float | None = None):
        self.path = Path(path)
        self.cache_dir = Path(cache_dir) if cache_dir else self.path.parent / (self.path.stem + "-void")
        self.ttl = ttl
        self._lock = threading.RLock()
        self._entries: dict[str, CatalogueEntry] = {}
        if self.path.exists():
            self._load()

    def _load(self):
        doc = json.loads(self.path.read_text(encoding="utf-8"))
        for item in doc.get("endpoints", []):
            entry = CatalogueEntry(**item)
            self._entries[entry.url] = entry

    def save(self):
        with self._lock:
            doc = {"endpoints": [e.to_json() for e in self._entries.values()]}
            self.path.parent.mkdir(parents=True, exist_ok=True)
            tmp = self.path.with_name(self.path.name + ".tmp")
            tmp.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
            os.replace(tmp, self.path)

    # registry

    def register(self, url: str, label: str = "", description: str = "") -> CatalogueEntry:
        check_endpoint_url(url)
        with self._lock:
            if url in self._entries:
                raise DuplicateEndpoint(f"endpoint already registered: {url}")
            entry = CatalogueEntry(url, label, description)
            self._entries[url] = entry
            self.save()
            return entry

    def get(self, url: str) -> CatalogueEntry:
        try:
            return self._entries[url]
        except KeyError:
            raise UnknownEndpoint(f"endpoint not registered: {url}") from None

    def __contains__(self, url) -> bool:
        return url in self._entries

    def __len__(self):
        return len(self._entries)

    def entries(self) -> list[CatalogueEntry]:
        return list(self._entries.values())

    def urls(self) -> list[str]:
        return list(self._entries)

    def set_capabilities(self, url: str, caps: Capabilities):
        with self._lock:
            self.get(url).capabilities = caps.to_json()
            self.save()

    def capabilities(self, url: str) -> Capabilities | None:
        entry = self._entries.get(url)
        if entry is None or entry.capabilities is None:
            return None
        return Capabilities.from_json(entry.capabilities)

    # VoID cache

    def cache_path(self, url: str, extended: bool = False) -> Path:
        return self.cache_dir / (url_digest(url) + (".ext.ttl" if extended else ".ttl"))

    def read_cache(self, url: str, extended: bool = False) -> VoidDescription | None:
        variant = "extended" if extended else "standard"
        entry = self._entries.get(url)
        path = self.cache_path(url, extended)
        if entry is None or variant not in entry.void_cached_at or not path.exists():
            return None
        if self.ttl is not None and time.time() - entry.void_cached_at[variant] > self.ttl:
            return None
        return VoidDescription.from_graph(parse_turtle(path.read_text(encoding="utf-8")), url)

    def write_cache(self, url: str, desc: VoidDescription, extended: bool = False):
        with self._lock:
            entry = self.get(url)
            self.cache_dir.mkdir(parents=True, exist_ok=True)
            path = self.cache_path(url, extended)
            tmp = path.with_name(path.name + ".tmp")
            tmp.write_text(serialize_turtle(desc.to_graph(), PREFIXES), encoding="utf-8")
            os.replace(tmp, path)
            entry.void_cached_at["extended" if extended else "standard"] = time.time()
            self.save()

    def invalidate(self, url: str):
        with self._lock:
            entry = self.get(url)
            for extended in (False, True):
                self.cache_path(url, extended).unlink(missing_ok=True)
            entry.void_cached_at.clear()
            self.save()


def get_void_descriptions(catalogue: Catalogue, client: SparqlClient, url: str, extended: bool = False,
                          refresh: bool = False, exact_linksets: bool = False,
                          timeout: float | None = None) -> tuple[VoidDescription, str]:
    """(description, source) with source one of cache / retrieved / computed.

    Order: cached copy, published VoID, then self-descriptive queries.
    Every non-cache result is written back to the cache.
    """
    catalogue.get(url)
    if refresh:
        catalogue.invalidate(url)
    cached = catalogue.read_cache(url, extended)
    if cached is not None:
        return cached, "cache"
    base = catalogue.read_cache(url, False) if extended else None
    source = "cache"
    if base is None:
        found = retrieve_void(client, url, timeout)
        if found is not None:
            base, stage = found
            source = "retrieved"
            log.info("VoID for %s retrieved via %s", url, stage)
        else:
            caps = catalogue.capabilities(url)
            aggregates = caps.aggregates_supported if caps else True
            page = min(caps.result_limit or 10_000, 10_000) if caps else 10_000
            base = compute_void(client, url, aggregates=aggregates, page=page, timeout=timeout)
            source = "computed"
        catalogue.write_cache(url, base, False)
    if not extended:
        return base, source
    others = [u for u in catalogue.urls() if u != url]
    desc = VoidDescription(**{**base.__dict__, "linksets": compute_linksets(
        client, url, others, exact=exact_linksets, timeout=timeout)})
    catalogue.write_cache(url, desc, True)
    return desc, "computed" if source == "cache" else source
