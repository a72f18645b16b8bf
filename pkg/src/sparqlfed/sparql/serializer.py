"""AST -> SPARQL text. Output re-parses to a structurally equal AST."""

from __future__ import annotations

import re

from ..terms import IRI, RDF_TYPE, XSD_STRING, BNode, Literal, Variable, escape_string
from .ast import BGP, BinOp, Call, Count, Filter, GraphPattern, Join, Not, Query, Service, Union, Values

_LOCAL_SAFE = re.compile(r"^[A-Za-z0-9_](?:[A-Za-z0-9_\-.]*[A-Za-z0-9_\-])?$")


class _Writer:
    def __init__(self, prefixes: dict[str, str] | None):
        self.prefixes = prefixes or {}

    def term(self, t) -> str:
        if isinstance(t, Variable):
            return "?" + t.name
        if isinstance(t, IRI):
            for name, ns in self.prefixes.items():
                if t.value.startswith(ns):
                    local = t.value[len(ns):]
                    if local == "" or _LOCAL_SAFE.match(local):
                        return f"{name}:{local}"
            return "<" + t.value + ">"
        if isinstance(t, BNode):
            return "_:" + t.label
        if isinstance(t, Literal):
            text = '"' + escape_string(t.lexical) + '"'
            if t.lang:
                return f"{text}@{t.lang}"
            if t.datatype != XSD_STRING:
                return f"{text}^^{self.term(IRI(t.datatype))}"
            return text
        raise TypeError(f"cannot serialize {t!r}")

    def triple(self, tp) -> str:
        s, p, o = tp
        pred = "a" if isinstance(p, IRI) and p.value == RDF_TYPE else self.term(p)
        return f"{self.term(s)} {pred} {self.term(o)} ."

    def expr(self, e) -> str:
        if isinstance(e, BinOp):
            return f"({self.expr(e.left)} {e.op} {self.expr(e.right)})"
        if isinstance(e, Not):
            return f"!{self.expr(e.expr)}" if isinstance(e.expr, (BinOp, Not, Call)) else f"!({self.expr(e.expr)})"
        if isinstance(e, Call):
            return f"{e.name}(" + ", ".join(self.expr(a) for a in e.args) + ")"
        return self.term(e)

    def body(self, p, indent: int) -> list[str]:
        """Lines of a group's content (without the enclosing braces)."""
        pad = "  " * indent
        if isinstance(p, Filter):
            return self.body(p.pattern, indent) + [f"{pad}FILTER({self.expr(p.expr)})"]
        if isinstance(p, BGP):
            return [pad + self.triple(tp) for tp in p.patterns]
        if isinstance(p, Join):
            lines = []
            for child in p.children:
                lines.extend(self.element(child, indent))
            return lines
        return self.element(p, indent)

    def group(self, p, indent: int) -> list[str]:
        pad = "  " * indent
        inner = self.body(p, indent + 1)
        if not inner:
            return [pad + "{ }"]
        return [pad + "{"] + inner + [pad + "}"]

    def element(self, p, indent: int) -> list[str]:
        """A pattern as one element inside an enclosing group."""
        pad = "  " * indent
        if isinstance(p, Service):
            head = f"{pad}SERVICE {'SILENT ' if p.silent else ''}{self.term(p.endpoint)} "
            g = self.group(p.pattern, indent)
            return [head + g[0].lstrip()] + g[1:]
        if isinstance(p, Union):
            lines: list[str] = []
            for k, branch in enumerate(p.branches):
                g = self.group(branch, indent)
                if k:
                    g[0] = pad + "UNION " + g[0].lstrip()
                lines.extend(g)
            return lines
        if isinstance(p, GraphPattern):
            g = self.group(p.pattern, indent)
            return [f"{pad}GRAPH {self.term(p.name)} " + g[0].lstrip()] + g[1:]
        if isinstance(p, Values):
            head = "(" + " ".join("?" + v for v in p.variables) + ")"
            rows = " ".join(
                "(" + " ".join("UNDEF" if x is None else self.term(x) for x in row) + ")"
                for row in p.rows
            )
            return [f"{pad}VALUES {head} {{ {rows} }}"]
        # BGP, Join and Filter need their own braces to stay separate elements
        return self.group(p, indent)

    def projection_item(self, item) -> str:
        if isinstance(item, Count):
            inner = "*" if item.var is None else "?" + item.var
            dist = "DISTINCT " if item.distinct else ""
            return f"(COUNT({dist}{inner}) AS ?{item.alias})"
        return "?" + item


def serialize_query(q: Query, prefixes: dict[str, str] | None = None) -> str:
    """SPARQL text for `q`; IRIs stay absolute unless a prefix table is supplied."""
    w = _Writer(prefixes)
    lines = [f"PREFIX {name}: <{ns}>" for name, ns in (prefixes or {}).items()]
    if q.form == "ASK":
        head = "ASK WHERE"
    else:
        cols = "*" if q.projection is None else " ".join(w.projection_item(i) for i in q.projection)
        head = f"SELECT {'DISTINCT ' if q.distinct else ''}{cols} WHERE"
    group = w.group(q.pattern, 0)
    lines.append(head + " " + group[0])
    lines.extend(group[1:])
    if q.group_by:
        lines.append("GROUP BY " + " ".join("?" + v for v in q.group_by))
    if q.limit is not None:
        lines.append(f"LIMIT {q.limit}")
    if q.offset is not None:
        lines.append(f"OFFSET {q.offset}")
    return "\n".join(lines) + "\n"


def serialize_pattern(p, prefixes: dict[str, str] | None = None) -> str:
    return "\n".join(_Writer(prefixes).group(p, 0))
