"""JSON-RPC 2.0 dispatch for the MCP server, independent of the transport."""

from __future__ import annotations

import itertools
import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional

import jsonschema

from .. import __version__
from ..client import SparqlClient
from ..solutions import SolutionSet
from .tools import Tool, ToolError, default_tools

log = logging.getLogger(__name__)

PROTOCOL_VERSION = "2025-06-18"
SUPPORTED_VERSIONS = ("2024-11-05", "2025-03-26", "2025-06-18")

PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
INTERNAL_ERROR = -32603
NOT_INITIALIZED = -32002
RESOURCE_NOT_FOUND = -32004

# older generic names for the same operations
ALIASES = {"run_tool": "tools/call", "get_resource": "resources/read"}


class RpcError(Exception):
    def __init__(self, code: int, message: str, data=None):
        self.code = code
        self.message = message
        self.data = data
        super().__init__(message)

    def to_json(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.data is not None:
            out["data"] = self.data
        return out


@dataclass
class Session:
    id: str
    created: float
    defaults: dict
    initialized: bool = False
    client_info: dict = field(default_factory=dict)
    stats: dict = field(default_factory=lambda: {"queries": 0, "failed": 0, "requests": 0, "elapsed": 0.0})
    results: dict = field(default_factory=dict)  # handle uri -> SolutionSet
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _counter: itertools.count = field(default_factory=itertools.count, repr=False)

    def add_stats(self, stats, failed: bool = False):
        with self._lock:
            self.stats["queries"] += 1
            self.stats["failed"] += int(failed)
            self.stats["requests"] += stats.total_requests
            self.stats["elapsed"] += stats.elapsed

    def keep(self, result: SolutionSet) -> str:
        with self._lock:
            uri = f"sparqlfed://results/{self.id}/{next(self._counter)}"
            self.results[uri] = result
            return uri


class McpServer:
    """Holds the catalogue, the HTTP client and the sessions.

    `handle` takes one decoded JSON-RPC message (or batch) and returns the
    response object, or None for notifications.
    """

    def __init__(self, catalogue, client: SparqlClient | None = None, result_cap: int = 1000,
                 default_timeout: int = 30, strategy: str = "hash", tools: list[Tool] | None = None):
        self.catalogue = catalogue
        self.client = client or SparqlClient(timeout=max(default_timeout, 30))
        self.strategy = strategy
        self.result_cap = result_cap
        self.default_timeout = default_timeout
        self.tools = {t.name: t for t in (tools or default_tools())}
        self.sessions: dict[str, Session] = {}
        self.catalogue_lock = threading.Lock()
        self._sessions_lock = threading.Lock()

    # sessions

    def new_session(self) -> Session:
        s = Session(uuid.uuid4().hex, time.time(),
                    {"timeout": self.default_timeout, "result_cap": self.result_cap})
        with self._sessions_lock:
            self.sessions[s.id] = s
        return s

    def end_session(self, session_id: str) -> bool:
        with self._sessions_lock:
            return self.sessions.pop(session_id, None) is not None

    def session(self, session_id: Optional[str]) -> Optional[Session]:
        return self.sessions.get(session_id) if session_id else None

    # manifest

    def manifest(self) -> dict:
        return {
            "serverInfo": {"name": "sparqlfed", "version": __version__},
            "tools": [t.describe() for t in self.tools.values()],
            "resources": self._resources(None),
            "prompts": [],
        }

    def _resources(self, session: Optional[Session]) -> list:
        out = [{"uri": f"sparqlfed://endpoints/{i}", "name": e.label or e.url, "description": e.description,
                "mimeType": "application/json"} for i, e in enumerate(self.catalogue.entries())]
        if session is not None:
            out += [{"uri": uri, "name": uri.rsplit("/", 1)[-1], "description": "full query result",
                     "mimeType": "application/sparql-results+json"} for uri in session.results]
        return out

    # dispatch

    def handle(self, message, session: Optional[Session] = None):
        """Response for one message or a batch; None when nothing is to be sent."""
        if isinstance(message, list):
            if not message:
                return _error(None, RpcError(INVALID_REQUEST, "empty batch"))
            out = [r for r in (self._one(m, session) for m in message) if r is not None]
            return out or None
        return self._one(message, session)

    def _one(self, msg, session: Optional[Session]):
        if not isinstance(msg, dict) or msg.get("jsonrpc") != "2.0" or not isinstance(msg.get("method"), str):
            ident = msg.get("id") if isinstance(msg, dict) else None
            return _error(ident if _valid_id(ident) else None, RpcError(INVALID_REQUEST, "not a JSON-RPC 2.0 request"))
        is_note = "id" not in msg
        ident = msg.get("id")
        if not is_note and not _valid_id(ident):
            return _error(None, RpcError(INVALID_REQUEST, "id must be a string, number or null"))
        params = msg.get("params", {})
        try:
            if params is not None and not isinstance(params, (dict, list)):
                raise RpcError(INVALID_REQUEST, "params must be an object or array")
            result = self.call(msg["method"], params if isinstance(params, dict) else {}, session)
        except RpcError as exc:
            return None if is_note else _error(ident, exc)
        except Exception as exc:  # keep the server alive; report as internal error
            log.exception("internal error in %s", msg.get("method"))
            return None if is_note else _error(ident, RpcError(INTERNAL_ERROR, f"internal error: {exc}"))
        return None if is_note else {"jsonrpc": "2.0", "id": ident, "result": result}

    def call(self, method: str, params: dict, session: Optional[Session]):
        method = ALIASES.get(method, method)
        if method == "initialize":
            return self._initialize(params, session)
        if method == "ping":
            return {}
        if method.startswith("notifications/"):
            if method == "notifications/initialized" and session is not None:
                session.initialized = True
            return {}
        if session is None:
            raise RpcError(NOT_INITIALIZED, "session not initialized; call initialize first")
        if method == "mcp_discover":
            return self.manifest()
        if method == "tools/list":
            return {"tools": [t.describe() for t in self.tools.values()]}
        if method == "tools/call":
            return self._call_tool(params, session)
        if method == "resources/list":
            return {"resources": self._resources(session)}
        if method == "resources/read":
            return self._read_resource(params, session)
        if method == "prompts/list":
            return {"prompts": []}
        raise RpcError(METHOD_NOT_FOUND, f"method not found: {method}")

    def _initialize(self, params: dict, session: Optional[Session]) -> dict:
        if session is None:
            raise RpcError(INTERNAL_ERROR, "transport did not provide a session")
        session.initialized = True
        session.client_info = params.get("clientInfo", {}) or {}
        requested = params.get("protocolVersion")
        version = requested if requested in SUPPORTED_VERSIONS else PROTOCOL_VERSION
        return {
            "protocolVersion": version,
            "capabilities": {"tools": {"listChanged": False},
                             "resources": {"subscribe": False, "listChanged": False},
                             "prompts": {"listChanged": False}},
            "serverInfo": {"name": "sparqlfed", "version": __version__},
            "instructions": "Use list_endpoints and get_void_descriptions to pick endpoints, then "
                            "run_sparql_query with SERVICE clauses naming them.",
        }

    def _call_tool(self, params: dict, session: Session) -> dict:
        name = params.get("name")
        tool = self.tools.get(name) if isinstance(name, str) else None
        if tool is None:
            raise RpcError(INVALID_PARAMS, f"unknown tool: {name!r}")
        args = params.get("arguments") or {}
        try:
            jsonschema.validate(args, tool.input_schema)
        except jsonschema.ValidationError as exc:
            raise RpcError(INVALID_PARAMS, f"invalid arguments for {name}: {exc.message}",
                           {"path": list(exc.absolute_path)}) from None
        try:
            payload = tool.handler(self, session, args)
            is_error = False
        except ToolError as exc:
            payload, is_error = {"error": exc.payload}, True
        return {"content": [{"type": "text", "text": json.dumps(payload, ensure_ascii=False)}],
                "structuredContent": payload, "isError": is_error}

    def _read_resource(self, params: dict, session: Session) -> dict:
        uri = params.get("uri")
        if not isinstance(uri, str):
            raise RpcError(INVALID_PARAMS, "uri is required")
        if uri in session.results:
            text = json.dumps(session.results[uri].to_json(), ensure_ascii=False)
            return {"contents": [{"uri": uri, "mimeType": "application/sparql-results+json", "text": text}]}
        prefix = "sparqlfed://endpoints/"
        if uri.startswith(prefix) and uri[len(prefix):].isdigit():
            entries = self.catalogue.entries()
            i = int(uri[len(prefix):])
            if i < len(entries):
                text = json.dumps(entries[i].to_json(), ensure_ascii=False)
                return {"contents": [{"uri": uri, "mimeType": "application/json", "text": text}]}
        raise RpcError(RESOURCE_NOT_FOUND, f"resource not found: {uri}")

    def close(self):
        self.client.close()


def _valid_id(ident) -> bool:
    return ident is None or (isinstance(ident, (str, int, float)) and not isinstance(ident, bool))


def _error(ident, exc: RpcError) -> dict:
    return {"jsonrpc": "2.0", "id": ident, "error": exc.to_json()}


def parse_error_response(detail: str) -> dict:
    return _error(None, RpcError(PARSE_ERROR, f"parse error: {detail}"))
