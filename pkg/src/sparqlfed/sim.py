"""In-process SPARQL endpoints over HTTP with feature restrictions and fault injection.

Each simulator owns one port and serves:

    GET/POST /sparql          SPARQL protocol, JSON results
    GET      /sparql          (no query) service description in Turtle
    GET      /.well-known/void  VoID in Turtle when publish_void == "well-known"
"""

from __future__ import annotations

import collections
import json
import logging
import random
import socket
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlsplit

from .graph import Graph
from .lexer import ParseError
from .solutions import SolutionSet, boolean_json
from .sparql.ast import Query, Service, Values
from .sparql.evaluate import evaluate_query
from .sparql.parser import parse_query
from .sparql.serializer import serialize_query
from .sparql.transforms import pattern_variables, walk
from .terms import IRI, RDF_TYPE, SD, BNode
from .turtle import load_graph, serialize_turtle

log = logging.getLogger(__name__)

PUBLISH_MODES = ("none", "well-known", "default-graph", "named-graph", "service-description")
VOID_GRAPH = "urn:sparqlfed:void-graph"
TRUNCATION_HEADER = "X-SPARQL-Truncated"


@dataclass
class Features:
    values: bool = True
    service: bool = True
    aggregates: bool = True


@dataclass
class SimConfig:
    graph: Graph = field(default_factory=Graph)
    port: int = 0
    host: str = "127.0.0.1"
    features: Features = field(default_factory=Features)
    result_limit: Optional[int] = None
    latency: float = 0.0  # seconds added before every SPARQL answer
    availability: str = "up"  # "up", "down" or "flaky"
    flaky_probability: float = 0.0
    seed: int = 0
    publish_void: str = "none"
    log_size: int = 10_000

    def __post_init__(self):
        if self.result_limit is not None and self.result_limit < 0:
            raise ValueError("result_limit must be >= 0")
        if not 0.0 <= self.flaky_probability <= 1.0:
            raise ValueError("flaky probability must lie in [0, 1]")
        if self.availability not in ("up", "down", "flaky"):
            raise ValueError(f"unknown availability {self.availability!r}")
        if self.publish_void not in PUBLISH_MODES:
            raise ValueError(f"unknown publish_void mode {self.publish_void!r}")


@dataclass(frozen=True)
class LogEntry:
    timestamp: float
    query: str
    status: int


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True
    sim: "SimEndpoint"


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: _Server

    def setup(self):
        super().setup()
        # headers and body go out as separate writes; without this Nagle delays small answers
        self.connection.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def log_message(self, fmt, *args):  # silence default stderr logging
        pass

    def do_GET(self):
        self.server.sim._handle(self, "GET")

    def do_POST(self):
        self.server.sim._handle(self, "POST")

    def send_body(self, status: int, body: bytes, ctype: str, extra: dict | None = None):
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        for k, v in (extra or {}).items():
            self.send_header(k, v)
        self.end_headers()
        self.wfile.write(body)


class Refusal(Exception):
    def __init__(self, status: int, message: str):
        self.status = status
        self.message = message
        super().__init__(message)


class SimEndpoint:
    """A running simulator; use as a context manager or call close()."""

    def __init__(self, config: SimConfig, client=None):
        self.config = config
        self._log: collections.deque = collections.deque(maxlen=config.log_size)
        self._log_lock = threading.Lock()
        self._rng = random.Random(config.seed)
        self._rng_lock = threading.Lock()
        self._client = client
        self._own_client = False
        self._server = _Server((config.host, config.port), _Handler)
        self._server.sim = self
        self.port = self._server.server_address[1]
        self.url = f"http://{config.host}:{self.port}/sparql"
        self._default, self._named = self._datasets()
        self._thread = threading.Thread(target=self._server.serve_forever, kwargs={"poll_interval": 0.05},
                                        name=f"sim-{self.port}", daemon=True)
        self._thread.start()

    # lifecycle

    def close(self):
        self._server.shutdown()
        self._server.server_close()
        if self._own_client and self._client is not None:
            self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def request_log(self) -> list[LogEntry]:
        with self._log_lock:
            return list(self._log)

    def clear_log(self):
        with self._log_lock:
            self._log.clear()

    # published metadata

    def void_graph(self) -> Graph:
        from .void import void_from_graph
        return void_from_graph(self.config.graph, self.url).to_graph()

    def _datasets(self):
        mode = self.config.publish_void
        if mode == "default-graph":
            g = self.config.graph.copy()
            g.update(self.void_graph())
            return g, {}
        if mode == "named-graph":
            return self.config.graph, {VOID_GRAPH: self.void_graph()}
        return self.config.graph, {}

    def service_description(self) -> str:
        g = Graph()
        node = BNode("service")
        g.add(node, IRI(RDF_TYPE), IRI(SD + "Service"))
        g.add(node, IRI(SD + "endpoint"), IRI(self.url))
        for feature, on in (("VALUES", self.config.features.values),
                            ("SERVICE", self.config.features.service),
                            ("aggregates", self.config.features.aggregates)):
            if on:
                g.add(node, IRI(SD + "feature"), IRI(f"urn:sparqlfed:feature:{feature}"))
        if self.config.publish_void == "service-description":
            void = self.void_graph()
            from .void import dataset_iri
            g.add(node, IRI(SD + "defaultDataset"), IRI(dataset_iri(self.url)))
            g.update(void)
        return serialize_turtle(g, {"sd": SD})

    # request handling

    def _record(self, query: str, status: int):
        with self._log_lock:
            self._log.append(LogEntry(time.time(), query, status))

    def _is_down(self) -> bool:
        if self.config.availability == "down":
            return True
        if self.config.availability == "flaky":
            with self._rng_lock:
                return self._rng.random() < self.config.flaky_probability
        return False

    def _handle(self, h: _Handler, method: str):
        parts = urlsplit(h.path)
        if self._is_down():
            # drop the connection without an answer, like an unreachable host
            h.close_connection = True
            return
        length = int(h.headers.get("Content-Length") or 0)
        raw = h.rfile.read(length) if length else b""
        if parts.path == "/.well-known/void":
            if method == "GET" and self.config.publish_void == "well-known":
                body = serialize_turtle(self.void_graph()).encode()
                h.send_body(200, body, "text/turtle; charset=utf-8")
            else:
                h.send_body(404, b"no VoID published here\n", "text/plain")
            return
        if parts.path != "/sparql":
            h.send_body(404, b"not found\n", "text/plain")
            return
        query = None
        params = parse_qs(parts.query)
        if "query" in params:
            query = params["query"][0]
        elif method == "POST":
            ctype = (h.headers.get("Content-Type") or "").split(";")[0].strip()
            if ctype == "application/sparql-query":
                query = raw.decode("utf-8")
            else:
                form = parse_qs(raw.decode("utf-8"))
                if "query" in form:
                    query = form["query"][0]
        if query is None:
            if method == "GET":
                h.send_body(200, self.service_description().encode(), "text/turtle; charset=utf-8")
            else:
                h.send_body(400, b"missing 'query' parameter\n", "text/plain")
            return
        if self.config.latency:
            time.sleep(self.config.latency)
        try:
            status, body, extra = 200, *self.answer(query)
        except Refusal as exc:
            status, body, extra = exc.status, (exc.message + "\n").encode(), {}
        self._record(query, status)
        try:
            ctype = "application/sparql-results+json" if status == 200 else "text/plain; charset=utf-8"
            h.send_body(status, body, ctype, extra)
        except (BrokenPipeError, ConnectionResetError):
            pass

    def answer(self, text: str) -> tuple[bytes, dict]:
        """JSON results body and extra headers for a query, or raise Refusal."""
        try:
            q = parse_query(text)
        except ParseError as exc:
            raise Refusal(400, f"query parse error ({exc.kind}): {exc}") from None
        self._check_features(q)
        try:
            result = evaluate_query(self._default, q, self._service_handler(), self._named)
        except Refusal:
            raise
        except Exception as exc:
            log.debug("evaluation failed", exc_info=True)
            raise Refusal(500, f"evaluation failed: {exc}") from None
        extra = {}
        if isinstance(result, bool):
            doc = boolean_json(result)
        else:
            cap = self.config.result_limit
            if cap is not None and len(result.bindings) > cap:
                result.bindings = result.bindings[:cap]
                extra[TRUNCATION_HEADER] = "true"
            doc = result.to_json()
        return json.dumps(doc).encode("utf-8"), extra

    def _check_features(self, q: Query):
        f = self.config.features
        nodes = list(walk(q.pattern))
        if not f.values and any(isinstance(n, Values) for n in nodes):
            raise Refusal(400, "VALUES is not supported by this endpoint")
        if not f.service and any(isinstance(n, Service) for n in nodes):
            raise Refusal(400, "SERVICE is not supported by this endpoint (federated queries are blocked)")
        if not f.aggregates and (q.aggregates or q.group_by):
            raise Refusal(400, "aggregates (COUNT, GROUP BY) are not supported by this endpoint")

    def _service_handler(self):
        def handle(endpoint: str, pattern):
            if endpoint == self.url:
                from .sparql.evaluate import evaluate_pattern
                return evaluate_pattern(self._default, pattern, None, handle, self._named)
            if self._client is None:
                from .client import SparqlClient
                self._client = SparqlClient(timeout=30)
                self._own_client = True
            sub = Query("SELECT", pattern, tuple(pattern_variables(pattern)) or None)
            res = self._client.execute(endpoint, serialize_query(sub))
            return res.bindings if isinstance(res, SolutionSet) else ([{}] if res else [])
        return handle


def serve(config: SimConfig, client=None) -> SimEndpoint:
    return SimEndpoint(config, client)


# --- deployments ----------------------------------------------------------------

def config_from_json(graph: Graph, doc: dict) -> SimConfig:
    doc = dict(doc)
    features = Features(**doc.pop("features", {}))
    return SimConfig(graph=graph, features=features, **doc)


class Deployment:
    """Several simulators launched from one descriptor."""

    def __init__(self, endpoints: list[SimEndpoint], labels: list[str], descriptions: list[str]):
        self.endpoints = endpoints
        self.labels = labels
        self.descriptions = descriptions

    @property
    def urls(self) -> list[str]:
        return [e.url for e in self.endpoints]

    def close(self):
        for e in self.endpoints:
            e.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def register(self, catalogue):
        for ep, label, desc in zip(self.endpoints, self.labels, self.descriptions):
            if ep.url not in catalogue:
                catalogue.register(ep.url, label, desc)


def launch_deployment(descriptor: dict, base_dir: str | Path = ".") -> Deployment:
    """Start one simulator per descriptor entry.

    Descriptor: {"endpoints": [{"shard_file": ..., "port": 0, "label": ...,
    "description": ..., "config": {SimConfig overrides}}], "catalogue": path}
    """
    base = Path(base_dir)
    items = descriptor.get("endpoints", [])
    ports = [it.get("port", 0) for it in items if it.get("port", 0)]
    if len(ports) != len(set(ports)):
        raise ValueError("deployment ports must be unique")
    started: list[SimEndpoint] = []
    try:
        for it in items:
            path = base / it["shard_file"]
            graph = load_graph(path, skolem=False)
            overrides = dict(it.get("config", {}))
            overrides["port"] = it.get("port", 0)
            started.append(SimEndpoint(config_from_json(graph, overrides)))
    except BaseException:
        for ep in started:
            ep.close()
        raise
    return Deployment(started, [it.get("label", Path(it["shard_file"]).stem) for it in items],
                      [it.get("description", "") for it in items])
