"""stdio and HTTP transports for McpServer.

stdio: one JSON-RPC message per line in, one response per line out; the
connection is a single session.

HTTP: POST /mcp with a JSON body. `initialize` opens a session and returns
its id in the Mcp-Session-Id header; later requests send it back. DELETE
/mcp ends the session. Responses are always complete JSON (no SSE).
"""

from __future__ import annotations

import json
import logging
import socket
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import IO

from .server import INVALID_REQUEST, McpServer, RpcError, _error, parse_error_response

log = logging.getLogger(__name__)

SESSION_HEADER = "Mcp-Session-Id"


def serve_stdio(server: McpServer, stdin: IO[str] | None = None, stdout: IO[str] | None = None):
    """Process messages until EOF."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    session = server.new_session()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            response = parse_error_response(str(exc))
        else:
            response = server.handle(message, session)
        if response is not None:
            stdout.write(json.dumps(response, ensure_ascii=False) + "\n")
            stdout.flush()
    server.end_session(session.id)


def _is_initialize(message) -> bool:
    if isinstance(message, list):
        return any(_is_initialize(m) for m in message)
    return isinstance(message, dict) and message.get("method") == "initialize"


class _HttpServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True
    mcp: McpServer
    path = "/mcp"


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: _HttpServer

    def setup(self):
        super().setup()
        self.connection.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def log_message(self, fmt, *args):
        log.debug("mcp http: " + fmt, *args)

    def _send(self, status: int, doc=None, headers: dict | None = None):
        body = b"" if doc is None else json.dumps(doc, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        if doc is not None:
            self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        for k, v in (headers or {}).items():
            self.send_header(k, v)
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        length = int(self.headers.get("Content-Length") or 0)
        if length:
            self.rfile.read(length)
        self._send(405, {"error": "streaming is not offered; POST JSON-RPC messages"}, {"Allow": "POST, DELETE"})

    def do_DELETE(self):
        if self.path != self.server.path:
            return self._send(404, {"error": "not found"})
        sid = self.headers.get(SESSION_HEADER)
        self._send(204 if sid and self.server.mcp.end_session(sid) else 404)

    def do_POST(self):
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if self.path != self.server.path:
            return self._send(404, {"error": "not found"})
        try:
            message = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return self._send(400, parse_error_response(str(exc)))
        mcp = self.server.mcp
        headers = {}
        sid = self.headers.get(SESSION_HEADER)
        if _is_initialize(message):
            session = mcp.new_session()
            headers[SESSION_HEADER] = session.id
        elif sid:
            session = mcp.session(sid)
            if session is None:
                ident = message.get("id") if isinstance(message, dict) else None
                return self._send(404, _error(ident, RpcError(INVALID_REQUEST, f"unknown session {sid}")))
        else:
            session = None  # dispatch reports "not initialized" for methods that need one
        response = mcp.handle(message, session)
        if response is None:
            return self._send(202, None, headers)
        self._send(200, response, headers)


class HttpTransport:
    """Background HTTP listener; `url` is the POST endpoint."""

    def __init__(self, server: McpServer, host: str = "127.0.0.1", port: int = 0):
        self._http = _HttpServer((host, port), _Handler)
        self._http.mcp = server
        self.port = self._http.server_address[1]
        self.url = f"http://{host}:{self.port}/mcp"
        self._thread = threading.Thread(target=self._http.serve_forever, kwargs={"poll_interval": 0.1},
                                        name="mcp-http", daemon=True)
        self._thread.start()

    def close(self):
        self._http.shutdown()
        self._http.server_close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
