"""Tool definitions exposed over MCP: schemas plus handlers."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

from ..catalogue import get_void_descriptions
from ..client import EndpointError, check_endpoint_url
from ..federation import FederationEngine, FederationError
from ..lexer import ParseError
from ..solutions import SolutionSet, boolean_json
from ..turtle import serialize_turtle
from ..void import PREFIXES

log = logging.getLogger(__name__)

SCHEMA_DIALECT = "https://json-schema.org/draft/2020-12/schema"

_ERROR_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"type": "string"},
        "message": {"type": "string"},
        "hint": {"type": "string"},
        "position": {
            "type": "object",
            "properties": {"line": {"type": "integer"}, "column": {"type": "integer"},
                           "offset": {"type": "integer"}},
        },
        "expected": {"type": "array", "items": {"type": "string"}},
        "endpoint": {"type": "string"},
    },
    "required": ["kind", "message"],
}

RUN_SPARQL_INPUT = {
    "$schema": SCHEMA_DIALECT,
    "type": "object",
    "properties": {
        "query": {"type": "string", "minLength": 1,
                  "description": "SPARQL query; name target endpoints with SERVICE <url> { ... }"},
        "format": {"type": "string", "enum": ["json"], "default": "json"},
        "timeout_seconds": {"type": "integer", "minimum": 1, "maximum": 600, "default": 30},
    },
    "required": ["query"],
    "additionalProperties": False,
}

RUN_SPARQL_OUTPUT = {
    "$schema": SCHEMA_DIALECT,
    "type": "object",
    "properties": {
        "results": {"type": "object", "description": "SPARQL 1.1 query results JSON"},
        "stats": {"type": "object"},
        "truncated": {"type": "boolean"},
        "total_rows": {"type": "integer"},
        "result_handle": {"type": "string", "description": "resource URI holding the full result"},
        "error": _ERROR_SCHEMA,
    },
}

VOID_INPUT = {
    "$schema": SCHEMA_DIALECT,
    "type": "object",
    "properties": {
        "endpoint": {"type": "string", "pattern": "^https?://", "description": "SPARQL endpoint URL"},
        "extended": {"type": "boolean", "default": False,
                     "description": "add linksets towards the other registered endpoints"},
    },
    "required": ["endpoint"],
    "additionalProperties": False,
}

VOID_OUTPUT = {
    "$schema": SCHEMA_DIALECT,
    "type": "object",
    "properties": {
        "void": {"type": "string", "description": "VoID description in Turtle"},
        "source": {"type": "string", "enum": ["cache", "retrieved", "computed"]},
        "error": _ERROR_SCHEMA,
    },
}

LIST_INPUT = {"$schema": SCHEMA_DIALECT, "type": "object", "properties": {}, "additionalProperties": False}

LIST_OUTPUT = {
    "$schema": SCHEMA_DIALECT,
    "type": "object",
    "properties": {
        "endpoints": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"url": {"type": "string"}, "label": {"type": "string"},
                               "description": {"type": "string"}},
                "required": ["url", "label", "description"],
            },
        },
    },
    "required": ["endpoints"],
}

PARSE_HINTS = {
    "syntax": "check the query against SPARQL 1.1 grammar near the reported position",
    "undefined-prefix": "declare the prefix with PREFIX name: <iri> or write the full IRI",
    "unbalanced-braces": "every '{' needs a matching '}'",
    "malformed-service": "write SERVICE <endpoint-url> { triple patterns }",
    "unsupported-feature": "rewrite the query without this construct",
}


class ToolError(Exception):
    """Failure reported to the agent inside a tool result (isError: true)."""

    def __init__(self, payload: dict):
        self.payload = payload
        super().__init__(payload.get("message", ""))


@dataclass
class Tool:
    name: str
    description: str
    input_schema: dict
    output_schema: dict
    handler: Callable

    def describe(self) -> dict:
        return {"name": self.name, "description": self.description, "inputSchema": self.input_schema,
                "outputSchema": self.output_schema}


def parse_error_payload(exc: ParseError) -> dict:
    out = exc.to_json()
    out["kind"] = "parse-error:" + exc.kind
    out["hint"] = PARSE_HINTS.get(exc.kind, PARSE_HINTS["syntax"])
    return out


def run_sparql_query(server, session, args: dict) -> dict:
    timeout = args.get("timeout_seconds", session.defaults["timeout"])
    engine = FederationEngine(server.client, server.catalogue, server.strategy)
    try:
        result, stats = engine.run(args["query"], deadline=float(timeout))
    except ParseError as exc:
        raise ToolError(parse_error_payload(exc)) from None
    except FederationError as exc:
        if exc.stats is not None:
            session.add_stats(exc.stats, failed=True)
        raise ToolError(exc.to_json()) from None
    session.add_stats(stats)
    if isinstance(result, bool):
        return {"results": boolean_json(result), "stats": stats.to_json(), "truncated": False, "total_rows": 1}
    cap = session.defaults["result_cap"]
    doc = {"stats": stats.to_json(), "total_rows": len(result.bindings), "truncated": False}
    if len(result.bindings) > cap:
        shown = SolutionSet(result.variables, result.bindings[:cap], result.truncated)
        doc.update(results=shown.to_json(), truncated=True, result_handle=session.keep(result))
    else:
        doc["results"] = result.to_json()
    if result.truncated:
        doc["truncated"] = True
    return doc


def get_void(server, session, args: dict) -> dict:
    url = args["endpoint"]
    try:
        check_endpoint_url(url)
    except ValueError as exc:
        raise ToolError({"kind": "invalid-endpoint", "message": str(exc)}) from None
    with server.catalogue_lock:
        if url not in server.catalogue:
            try:
                server.client.execute(url, "ASK {}", timeout=10)
            except EndpointError as exc:
                raise ToolError(exc.to_json()) from None
            server.catalogue.register(url, "", "")
        try:
            desc, source = get_void_descriptions(server.catalogue, server.client, url,
                                                 extended=bool(args.get("extended", False)))
        except EndpointError as exc:
            raise ToolError(exc.to_json()) from None
    return {"void": serialize_turtle(desc.to_graph(), PREFIXES), "source": source}


def list_endpoints(server, session, args: dict) -> dict:
    return {"endpoints": [{"url": e.url, "label": e.label, "description": e.description}
                          for e in server.catalogue.entries()]}


def default_tools() -> list[Tool]:
    return [
        Tool("run_sparql_query",
             "Run a SPARQL query. Endpoints are addressed with SERVICE <url> { ... }; a single SERVICE "
             "is sent to its endpoint as is, several are decomposed and joined by the server.",
             RUN_SPARQL_INPUT, RUN_SPARQL_OUTPUT, run_sparql_query),
        Tool("get_void_descriptions",
             "VoID statistics (classes, properties, counts) of an endpoint, from cache, from what the "
             "endpoint publishes, or computed with aggregate queries.",
             VOID_INPUT, VOID_OUTPUT, get_void),
        Tool("list_endpoints", "Registered endpoints with their one-sentence descriptions.",
             LIST_INPUT, LIST_OUTPUT, list_endpoints),
    ]
