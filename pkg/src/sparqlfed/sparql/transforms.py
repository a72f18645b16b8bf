"""Structural operations on patterns: SERVICE counting and unwrapping,
trivial federations, and split classification."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterator, Sequence

from ..graph import TriplePattern
from ..terms import IRI, BNode, Variable
from .ast import BGP, Call, Filter, GraphPattern, Join, Not, BinOp, Query, Service, Union, Values


class TransformError(ValueError):
    pass


def children(p) -> tuple:
    if isinstance(p, (Service, Filter, GraphPattern)):
        return (p.pattern,)
    if isinstance(p, Union):
        return p.branches
    if isinstance(p, Join):
        return p.children
    return ()


def walk(p) -> Iterator:
    """Pre-order traversal of a pattern tree."""
    stack = [p]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def _pattern_of(q):
    return q.pattern if isinstance(q, Query) else q


def count_services(q) -> int:
    return sum(1 for node in walk(_pattern_of(q)) if isinstance(node, Service))


def service_endpoints(q) -> list[str]:
    """Endpoint IRIs in order of first appearance."""
    seen = {}
    for node in walk(_pattern_of(q)):
        if isinstance(node, Service):
            seen.setdefault(node.endpoint.value, None)
    return list(seen)


def triple_patterns(p) -> list[TriplePattern]:
    out = []
    for node in walk(p):
        if isinstance(node, BGP):
            out.extend(node.patterns)
    return out


def expr_variables(e) -> set[str]:
    if isinstance(e, Variable):
        return {e.name}
    if isinstance(e, BinOp):
        return expr_variables(e.left) | expr_variables(e.right)
    if isinstance(e, Not):
        return expr_variables(e.expr)
    if isinstance(e, Call):
        out = set()
        for a in e.args:
            out |= expr_variables(a)
        return out
    return set()


def pattern_variables(p) -> list[str]:
    """Variables a pattern can bind, in order of appearance (FILTER-only variables excluded)."""
    seen: dict[str, None] = {}
    for node in walk(p):
        if isinstance(node, BGP):
            for tp in node.patterns:
                for t in tp:
                    if isinstance(t, Variable):
                        seen.setdefault(t.name, None)
        elif isinstance(node, Values):
            for v in node.variables:
                seen.setdefault(v, None)
        elif isinstance(node, GraphPattern) and isinstance(node.name, Variable):
            seen.setdefault(node.name.name, None)
    return list(seen)


def certain_variables(p) -> set[str]:
    """Variables bound in every solution of `p`."""
    if isinstance(p, BGP):
        return {t.name for tp in p.patterns for t in tp if isinstance(t, Variable)}
    if isinstance(p, Join):
        out = set()
        for c in p.children:
            out |= certain_variables(c)
        return out
    if isinstance(p, Union):
        sets = [certain_variables(b) for b in p.branches]
        return set.intersection(*sets) if sets else set()
    if isinstance(p, (Service, Filter)):
        return certain_variables(p.pattern)
    if isinstance(p, GraphPattern):
        extra = {p.name.name} if isinstance(p.name, Variable) else set()
        return certain_variables(p.pattern) | extra
    if isinstance(p, Values):
        return {v for k, v in enumerate(p.variables) if all(row[k] is not None for row in p.rows)}
    return set()


def replace_services(p, fn):
    """Rebuild `p` with every Service node replaced by fn(service)."""
    if isinstance(p, Service):
        return fn(p)
    if isinstance(p, Union):
        return Union(tuple(replace_services(b, fn) for b in p.branches))
    if isinstance(p, Join):
        return Join(tuple(replace_services(c, fn) for c in p.children))
    if isinstance(p, Filter):
        return Filter(replace_services(p.pattern, fn), p.expr)
    if isinstance(p, GraphPattern):
        return GraphPattern(p.name, replace_services(p.pattern, fn))
    return p


def unwrap_single_service(q: Query) -> tuple[str, Query]:
    """Drop the only SERVICE wrapper, returning its endpoint and the bare query."""
    n = count_services(q)
    if n != 1:
        raise TransformError(f"expected exactly one SERVICE, found {n}")
    found = []

    def strip(svc):
        found.append(svc.endpoint.value)
        return svc.pattern

    pattern = replace_services(q.pattern, strip)
    return found[0], dataclasses.replace(q, pattern=pattern)


def build_trivial_federation(patterns: Sequence[TriplePattern], endpoints: Sequence[str]):
    """Each triple pattern becomes a UNION of SERVICE calls over all endpoints, all joined."""
    patterns = list(patterns.patterns if isinstance(patterns, BGP) else patterns)
    if not patterns:
        raise TransformError("trivial federation needs a non-empty BGP")
    if not endpoints:
        raise TransformError("trivial federation needs at least one endpoint")
    parts = []
    for tp in patterns:
        branches = tuple(Service(IRI(e), BGP((tp,))) for e in endpoints)
        parts.append(branches[0] if len(branches) == 1 else Union(branches))
    return parts[0] if len(parts) == 1 else Join(tuple(parts))


def trivial_federation_query(q: Query, endpoints: Sequence[str]) -> Query:
    """Rewrite a BGP query (optionally under FILTERs) into its trivial federation."""
    filters = []
    p = q.pattern
    while isinstance(p, Filter):
        filters.append(p.expr)
        p = p.pattern
    if not isinstance(p, BGP):
        raise TransformError("only BGP queries can be turned into a trivial federation")
    fed = build_trivial_federation(p.patterns, endpoints)
    for e in reversed(filters):
        fed = Filter(fed, e)
    return dataclasses.replace(q, pattern=fed)


@dataclass
class SplitReport:
    conjunctive: bool
    disjunctive: bool
    endpoints: list[str]

    def to_json(self):
        return dataclasses.asdict(self)


def _peel(p):
    while isinstance(p, Filter):
        p = p.pattern
    return p


def _has_service(p) -> bool:
    return any(isinstance(n, Service) for n in walk(p))


def classify_splits(p) -> SplitReport:
    p = _pattern_of(p)
    conj = disj = False
    for node in walk(p):
        if isinstance(node, Join):
            bearing = [c for c in node.children if _has_service(c)]
            if len(bearing) >= 2 and len(set(service_endpoints(Join(tuple(bearing))))) >= 2:
                conj = True
        elif isinstance(node, Union):
            branches = [_peel(b) for b in node.branches]
            if len(branches) >= 2 and all(isinstance(b, Service) for b in branches):
                bodies = {b.pattern for b in branches}
                if len(bodies) == 1 and len({b.endpoint for b in branches}) >= 2:
                    disj = True
    return SplitReport(conj, disj, service_endpoints(p))


def is_blank_free(p) -> bool:
    return not any(isinstance(t, BNode) for tp in triple_patterns(p) for t in tp)
