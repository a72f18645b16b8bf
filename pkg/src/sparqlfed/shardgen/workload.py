"""Workload queries and the per-query sets used by the sharding rules."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from ..graph import Graph, TriplePattern
from ..lexer import ParseError
from ..sparql.ast import BGP, Filter, Query
from ..sparql.parser import parse_query
from ..terms import IRI, RDF_TYPE, RDFS_DOMAIN, RDFS_LITERAL, RDFS_RANGE, XSD, BNode, Literal, Variable

log = logging.getLogger(__name__)


@dataclass
class Axioms:
    """rdfs:domain / rdfs:range lookup tables."""

    domains: dict = field(default_factory=dict)  # predicate IRI -> set of class IRIs
    ranges: dict = field(default_factory=dict)

    @classmethod
    def from_graphs(cls, *graphs: Graph | None) -> "Axioms":
        ax = cls()
        for g in graphs:
            if g is None:
                continue
            for table, pred in ((ax.domains, RDFS_DOMAIN), (ax.ranges, RDFS_RANGE)):
                for s, _, c in g.triples(p=IRI(pred)):
                    if isinstance(s, IRI) and _is_class(c):
                        table.setdefault(s.value, set()).add(c.value)
        return ax


def _is_class(term) -> bool:
    return isinstance(term, IRI) and term.value != RDFS_LITERAL and not term.value.startswith(XSD)


@dataclass
class WorkloadQuery:
    id: str
    question: str
    sparql: str
    query: Query
    bgp: tuple  # triple patterns, query blank nodes renamed to variables
    filters: tuple = ()
    predicates: frozenset = frozenset()  # P(q)
    classes: frozenset = frozenset()  # C(q)
    subjects: frozenset = frozenset()  # S(q)

    @property
    def applicability(self) -> dict:
        return applicability(self)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "P": sorted(self.predicates),
            "C": sorted(self.classes),
            "S": sorted(self.subjects),
            "applicability": self.applicability,
        }


def applicability(q: WorkloadQuery) -> dict:
    return {
        "vertical": len(q.predicates) >= 2,
        "class": len(q.classes) >= 2,
        "horizontal": len(q.subjects) >= 1 and len(q.classes) >= 1,
    }


def _variablize(patterns) -> tuple:
    """Rename query blank nodes to variables so the BGP can be split across SERVICEs."""
    def fix(t):
        return Variable("_b_" + t.label) if isinstance(t, BNode) else t
    return tuple(TriplePattern(fix(s), fix(p), fix(o)) for s, p, o in patterns)


def query_sets(patterns, axioms: Axioms | None = None):
    """(P(q), C(q), S(q)) for a BGP."""
    axioms = axioms or Axioms()
    preds, classes, subjects = set(), set(), set()
    for s, p, o in patterns:
        if isinstance(s, Variable):
            subjects.add(s.name)
        if not isinstance(p, IRI):
            continue
        preds.add(p.value)
        if p.value == RDF_TYPE:
            if _is_class(o):
                classes.add(o.value)
            continue
        classes |= axioms.domains.get(p.value, set())
        if not isinstance(o, Literal):
            classes |= axioms.ranges.get(p.value, set())
    return frozenset(preds), frozenset(classes), frozenset(subjects)


def extract_bgp(q: Query):
    """(patterns, filters) when the query is a BGP with optional FILTERs, else None."""
    p = q.pattern
    filters = []
    while isinstance(p, Filter):
        filters.append(p.expr)
        p = p.pattern
    if not isinstance(p, BGP):
        return None
    return p.patterns, tuple(reversed(filters))


def make_query(qid: str, sparql: str, question: str = "", axioms: Axioms | None = None) -> WorkloadQuery:
    q = parse_query(sparql)
    found = extract_bgp(q)
    if found is None:
        raise ValueError(f"query {qid} is not a basic graph pattern query")
    patterns, filters = found
    if not patterns:
        raise ValueError(f"query {qid} has an empty BGP")
    bgp = _variablize(patterns)
    P, C, S = query_sets(bgp, axioms)
    return WorkloadQuery(qid, question, sparql, q, bgp, filters, P, C, S)


def parse_workload(lines: Iterable[str], axioms: Axioms | None = None):
    """(queries, warnings) from JSON lines {id, question, sparql}."""
    queries, warnings = [], []
    seen = set()
    for n, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
            qid = str(doc["id"])
            sparql = doc["sparql"]
        except (ValueError, KeyError, TypeError) as exc:
            warnings.append(f"line {n}: unreadable workload entry ({exc})")
            continue
        if qid in seen:
            warnings.append(f"line {n}: duplicate query id {qid!r} skipped")
            continue
        try:
            wq = make_query(qid, sparql, doc.get("question", ""), axioms)
        except (ParseError, ValueError) as exc:
            warnings.append(f"query {qid}: skipped ({exc})")
            continue
        seen.add(qid)
        queries.append(wq)
    return queries, warnings


def load_workload(path: str | Path, axioms: Axioms | None = None):
    with open(path, encoding="utf-8") as fh:
        return parse_workload(fh, axioms)
