"""SPARQL protocol client with deadlines, retries and typed errors."""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import asdict, dataclass
from typing import Optional
from urllib.parse import urlencode, urlsplit

import httpx

from .solutions import SolutionSet, solutions_from_json

log = logging.getLogger(__name__)

RESULTS_JSON = "application/sparql-results+json"
GET_LIMIT = 1500  # bytes of urlencoded query before switching to POST
TRUNCATION_HEADER = "X-SPARQL-Truncated"
ERROR_KINDS = ("timeout", "unavailable", "http-status", "malformed-results", "feature-unsupported")
_FEATURE_WORDS = ("VALUES", "SERVICE", "COUNT", "AGGREGATE")
_REFUSAL_MARKERS = ("SUPPORT", "NOT ALLOWED", "DISABLED", "BLOCKED", "FORBIDDEN")


class EndpointError(Exception):
    """A failed request; `kind` is one of ERROR_KINDS."""

    def __init__(self, kind: str, message: str, endpoint: str = "", elapsed: float = 0.0,
                 status: int | None = None):
        assert kind in ERROR_KINDS, kind
        self.kind = kind
        self.message = message
        self.endpoint = endpoint
        self.elapsed = elapsed
        self.status = status
        super().__init__(f"{kind}: {message}" + (f" ({endpoint})" if endpoint else ""))

    def to_json(self) -> dict:
        out = {"kind": self.kind, "message": self.message, "endpoint": self.endpoint,
               "elapsed": round(self.elapsed, 4)}
        if self.status is not None:
            out["status"] = self.status
        return out


@dataclass
class Capabilities:
    values_supported: bool = True
    service_supported: bool = True
    aggregates_supported: bool = True
    result_limit: Optional[int] = None

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "Capabilities":
        return cls(**{k: doc[k] for k in ("values_supported", "service_supported",
                                          "aggregates_supported", "result_limit") if k in doc})


def check_endpoint_url(url: str) -> str:
    parts = urlsplit(url)
    if parts.scheme not in ("http", "https") or not parts.netloc:
        raise ValueError(f"endpoint must be an http(s) URL: {url!r}")
    return url


def classify_status(status: int, body: str) -> str:
    if status == 503:
        return "unavailable"
    if 400 <= status < 500:
        upper = body.upper()
        if any(w in upper for w in _FEATURE_WORDS) and any(m in upper for m in _REFUSAL_MARKERS):
            return "feature-unsupported"
    return "http-status"


class SparqlClient:
    """Shareable client; at most `per_endpoint_limit` requests in flight per endpoint."""

    def __init__(self, timeout: float = 30.0, max_retries: int = 1, backoff: float = 0.25,
                 row_cap: int = 100_000, per_endpoint_limit: int = 4):
        if timeout <= 0:
            raise ValueError("timeout must be positive")
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.row_cap = row_cap
        self.per_endpoint_limit = per_endpoint_limit
        self._http = httpx.Client(limits=httpx.Limits(max_connections=64, max_keepalive_connections=32))
        self._slots: dict[str, threading.BoundedSemaphore] = {}
        self._slots_lock = threading.Lock()

    def close(self):
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _slot(self, url: str) -> threading.BoundedSemaphore:
        with self._slots_lock:
            sem = self._slots.get(url)
            if sem is None:
                sem = self._slots[url] = threading.BoundedSemaphore(self.per_endpoint_limit)
            return sem

    def execute(self, url: str, query: str, timeout: float | None = None) -> SolutionSet | bool:
        """Run `query` at `url`; returns a SolutionSet, or a bool for ASK."""
        check_endpoint_url(url)
        timeout = self.timeout if timeout is None else timeout
        if timeout <= 0:
            raise EndpointError("timeout", "no time left before the deadline", url, 0.0)
        start = time.monotonic()
        deadline = start + timeout
        attempt = 0
        while True:
            try:
                return self._attempt(url, query, start, deadline)
            except EndpointError as exc:
                retry = exc.kind == "unavailable" and attempt < self.max_retries
                if not retry or time.monotonic() + self.backoff >= deadline:
                    raise
                attempt += 1
                log.debug("retrying %s after %s", url, exc)
                time.sleep(self.backoff)

    def _attempt(self, url, query, start, deadline):
        body = urlencode({"query": query})
        headers = {"Accept": RESULTS_JSON}
        if len(body) <= GET_LIMIT:
            request = self._http.build_request("GET", url + ("&" if "?" in url else "?") + body,
                                               headers=headers)
        else:
            headers["Content-Type"] = "application/x-www-form-urlencoded"
            request = self._http.build_request("POST", url, content=body.encode(), headers=headers)

        def fail(kind, message, status=None):
            return EndpointError(kind, message, url, time.monotonic() - start, status)

        remaining = deadline - time.monotonic()
        request.extensions["timeout"] = httpx.Timeout(max(remaining, 0.001)).as_dict()
        sem = self._slot(url)
        if not sem.acquire(timeout=max(remaining, 0)):
            raise fail("timeout", "waited too long for a free connection slot")
        try:
            try:
                response = self._http.send(request, stream=True)
            except httpx.TimeoutException:
                raise fail("timeout", f"no response within {deadline - start:.3g}s") from None
            except (httpx.TransportError, OSError) as exc:
                raise fail("unavailable", f"{type(exc).__name__}: {exc}") from None
            try:
                chunks = []
                for chunk in response.iter_bytes():
                    chunks.append(chunk)
                    if time.monotonic() > deadline:
                        raise fail("timeout", "deadline passed while reading the response")
            except httpx.TimeoutException:
                raise fail("timeout", "deadline passed while reading the response") from None
            except httpx.TransportError as exc:
                raise fail("unavailable", f"connection lost: {exc}") from None
            finally:
                response.close()
        finally:
            sem.release()
        raw = b"".join(chunks)
        if time.monotonic() > deadline:
            raise fail("timeout", "deadline passed while reading the response")
        if response.status_code != 200:
            text = raw.decode("utf-8", "replace")[:500]
            kind = classify_status(response.status_code, text)
            raise fail(kind, f"HTTP {response.status_code}: {text.strip()}", response.status_code)
        try:
            doc = json.loads(raw)
            result = solutions_from_json(doc)
        except (ValueError, KeyError, TypeError) as exc:
            raise fail("malformed-results", f"cannot read SPARQL JSON results: {exc}") from None
        if isinstance(result, SolutionSet):
            if response.headers.get(TRUNCATION_HEADER, "").lower() == "true":
                result.truncated = True
            if len(result.bindings) > self.row_cap:
                result.bindings = result.bindings[: self.row_cap]
                result.truncated = True
        return result

    def get_text(self, url: str, accept: str = "text/turtle", timeout: float | None = None) -> str | None:
        """Plain GET used for well-known documents; None on any non-200 answer."""
        try:
            r = self._http.get(url, headers={"Accept": accept}, timeout=timeout or self.timeout)
        except httpx.TimeoutException:
            raise EndpointError("timeout", "no response", url) from None
        except (httpx.TransportError, OSError) as exc:
            raise EndpointError("unavailable", str(exc), url) from None
        return r.text if r.status_code == 200 else None

    def probe_capabilities(self, url: str, timeout: float | None = None) -> Capabilities:
        """Canary queries for VALUES, SERVICE, COUNT and a result-size cap."""
        caps = Capabilities()

        def supported(query):
            try:
                self.execute(url, query, timeout)
                return True
            except EndpointError as exc:
                if exc.kind in ("unavailable", "timeout"):
                    raise
                return False

        caps.values_supported = supported("SELECT ?x WHERE { VALUES ?x { 1 } }")
        caps.service_supported = supported(f"ASK WHERE {{ SERVICE SILENT <{url}> {{ }} }}")
        total = None
        try:
            res = self.execute(url, "SELECT (COUNT(*) AS ?n) WHERE { ?s ?p ?o }", timeout)
            total = int(res.bindings[0]["n"].lexical)
        except EndpointError as exc:
            if exc.kind in ("unavailable", "timeout"):
                raise
            caps.aggregates_supported = False
        except (IndexError, KeyError, ValueError, AttributeError):
            caps.aggregates_supported = False
        big = self.row_cap
        res = self.execute(url, f"SELECT * WHERE {{ ?s ?p ?o }} LIMIT {big}", timeout)
        n = len(res.bindings)
        if res.truncated or (total is not None and n < min(total, big)):
            caps.result_limit = n
        return caps
