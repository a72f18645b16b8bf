"""Decomposition of multi-SERVICE queries into executable plans."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from ..sparql.ast import BGP, Filter, GraphPattern, Join, Query, Service, Union, Values
from ..sparql.serializer import serialize_query
from ..sparql.transforms import (
    certain_variables, count_services, expr_variables, pattern_variables, triple_patterns, walk,
)
from ..terms import Variable


class PlanError(Exception):
    """Query shape the federation engine cannot execute.

    kind: no-service, nested-service, outside-service or unsupported.
    """

    def __init__(self, kind: str, message: str):
        self.kind = kind
        self.message = message
        super().__init__(message)

    def to_json(self):
        return {"kind": self.kind, "message": self.message}


@dataclass
class RemoteFetch:
    endpoint: str
    pattern: object
    variables: tuple
    silent: bool = False
    id: int = 0

    def query(self, values: Values | None = None) -> Query:
        body = self.pattern if values is None else Join((values, self.pattern))
        return Query("SELECT", body, self.variables or None)

    def query_text(self, values: Values | None = None) -> str:
        return serialize_query(self.query(values))


@dataclass
class LocalJoin:
    left: object
    right: object
    shared: tuple
    strategy: str = "hash"  # or "bound"
    bind_on: tuple = ()  # variables sent as VALUES when strategy == "bound"


@dataclass
class LocalUnion:
    units: list


@dataclass
class LocalFilter:
    unit: object
    expr: object


@dataclass
class LocalValues:
    values: Values


@dataclass
class LocalModifiers:
    unit: object
    query: Query


@dataclass
class FederatedPlan:
    root: LocalModifiers
    fetches: list = field(default_factory=list)

    def units(self):
        stack = [self.root]
        while stack:
            u = stack.pop()
            yield u
            stack.extend(reversed(_unit_children(u)))

    def counts(self) -> dict:
        out: dict = {}
        for u in self.units():
            out[type(u).__name__] = out.get(type(u).__name__, 0) + 1
        return out

    def to_json(self) -> dict:
        return _unit_json(self.root)


def _unit_children(u) -> list:
    if isinstance(u, LocalJoin):
        return [u.left, u.right]
    if isinstance(u, LocalUnion):
        return list(u.units)
    if isinstance(u, (LocalFilter, LocalModifiers)):
        return [u.unit]
    return []


def _unit_json(u) -> dict:
    if isinstance(u, RemoteFetch):
        return {"type": "RemoteFetch", "id": u.id, "endpoint": u.endpoint, "silent": u.silent,
                "variables": list(u.variables), "query": u.query_text()}
    if isinstance(u, LocalJoin):
        return {"type": "LocalJoin", "strategy": u.strategy, "shared": list(u.shared),
                "left": _unit_json(u.left), "right": _unit_json(u.right)}
    if isinstance(u, LocalUnion):
        return {"type": "LocalUnion", "units": [_unit_json(x) for x in u.units]}
    if isinstance(u, LocalFilter):
        return {"type": "LocalFilter", "unit": _unit_json(u.unit)}
    if isinstance(u, LocalValues):
        return {"type": "LocalValues", "variables": list(u.values.variables), "rows": len(u.values.rows)}
    if isinstance(u, LocalModifiers):
        q = u.query
        return {"type": "LocalModifiers", "distinct": q.distinct, "limit": q.limit, "offset": q.offset,
                "projection": q.output_variables(), "count": bool(q.aggregates), "unit": _unit_json(u.unit)}
    raise TypeError(u)


# --- filter push-down -----------------------------------------------------------

def push_filter(p, expr):
    """`p` with `expr` moved inside SERVICE bodies, or None when it must stay local."""
    needed = expr_variables(expr)
    if isinstance(p, Service):
        if needed <= certain_variables(p.pattern):
            return Service(p.endpoint, Filter(p.pattern, expr), p.silent)
        return None
    if isinstance(p, Join):
        for k, child in enumerate(p.children):
            if needed <= certain_variables(child):
                pushed = push_filter(child, expr)
                if pushed is not None:
                    return Join(p.children[:k] + (pushed,) + p.children[k + 1:])
        return None
    if isinstance(p, Union):
        branches = [push_filter(b, expr) for b in p.branches]
        if any(b is None for b in branches):
            return None
        return Union(tuple(branches))
    if isinstance(p, Filter):
        inner = push_filter(p.pattern, expr)
        return None if inner is None else Filter(inner, p.expr)
    return None


# --- decomposition --------------------------------------------------------------

def _selectivity(p) -> tuple:
    """Sort key: fewer variables first, then more constants."""
    if isinstance(p, Values):
        return (-1, 0)
    tps = triple_patterns(p)
    variables = {t.name for tp in tps for t in tp if isinstance(t, Variable)}
    constants = sum(1 for tp in tps for t in tp if not isinstance(t, Variable))
    return (len(variables), -constants)


def order_children(children) -> list:
    """Greedy order: most selective first, then prefer children sharing variables."""
    remaining = list(children)
    ordered = []
    bound: set = set()
    while remaining:
        connected = [c for c in remaining if bound & set(pattern_variables(c))]
        pool = connected if ordered and connected else remaining
        best = min(pool, key=_selectivity)
        remaining.remove(best)
        ordered.append(best)
        bound |= set(pattern_variables(best))
    return ordered


class Planner:
    """Heuristic planner; subclass and override `order` to plug in another join order."""

    def __init__(self, strategy: str = "hash"):
        if strategy not in ("hash", "bound"):
            raise ValueError("strategy must be 'hash' or 'bound'")
        self.strategy = strategy

    order = staticmethod(order_children)

    def decompose(self, q: Query) -> FederatedPlan:
        n = count_services(q)
        if n == 0:
            raise PlanError("no-service", "the query has no SERVICE clause; name the target endpoint(s) "
                                          "with SERVICE <endpoint> { ... }")
        for node in walk(q.pattern):
            if isinstance(node, Service) and any(isinstance(m, Service) for m in walk(node.pattern)
                                                 if m is not node):
                raise PlanError("nested-service", "SERVICE nested inside SERVICE is not supported")
        self._fetches: list[RemoteFetch] = []
        self._ids = itertools.count()
        self._needed = self._needed_variables(q)
        unit = self._translate(q.pattern)
        return FederatedPlan(LocalModifiers(unit, q), self._fetches)

    def _needed_variables(self, q: Query) -> set:
        """Variables a fetch has to return: projected, grouped, counted, filtered
        or shared between two parts of the query."""
        out = set(q.output_variables() or pattern_variables(q.pattern))
        out |= set(q.group_by)
        out |= {a.var for a in q.aggregates if a.var}
        if q.projection is None or any(a.var is None for a in q.aggregates):
            out |= set(pattern_variables(q.pattern))
        seen: dict = {}
        for node in walk(q.pattern):
            if isinstance(node, Filter):
                out |= expr_variables(node.expr)
            if isinstance(node, (Service, Values)):
                for v in pattern_variables(node):
                    seen[v] = seen.get(v, 0) + 1
        out |= {v for v, k in seen.items() if k >= 2}
        return out

    def _translate(self, p):
        if isinstance(p, Service):
            variables = tuple(v for v in pattern_variables(p.pattern) if v in self._needed)
            fetch = RemoteFetch(p.endpoint.value, p.pattern, variables, p.silent, next(self._ids))
            self._fetches.append(fetch)
            return fetch
        if isinstance(p, Union):
            return LocalUnion([self._translate(b) for b in p.branches])
        if isinstance(p, Values):
            return LocalValues(p)
        if isinstance(p, Filter):
            pushed = push_filter(p.pattern, p.expr)
            if pushed is not None:
                return self._translate(pushed)
            return LocalFilter(self._translate(p.pattern), p.expr)
        if isinstance(p, Join):
            children = self.order(p.children)
            unit = self._translate(children[0])
            left_vars = set(pattern_variables(children[0]))
            left_certain = certain_variables(children[0])
            for child in children[1:]:
                right = self._translate(child)
                right_vars = set(pattern_variables(child))
                shared = tuple(sorted(left_vars & right_vars))
                bind_on = tuple(sorted(left_certain & right_vars))
                strategy = "bound" if self.strategy == "bound" and bind_on and _bindable(right) else "hash"
                unit = LocalJoin(unit, right, shared, strategy, bind_on if strategy == "bound" else ())
                left_vars |= right_vars
                left_certain |= certain_variables(child)
            return unit
        if isinstance(p, BGP):
            if not p.patterns:
                return LocalValues(Values((), ((),)))
            raise PlanError("outside-service", "triple patterns outside any SERVICE clause cannot be "
                                               "routed; wrap them in SERVICE <endpoint> { ... }")
        if isinstance(p, GraphPattern):
            raise PlanError("outside-service", "GRAPH outside a SERVICE clause is not supported")
        raise PlanError("unsupported", f"cannot plan {type(p).__name__}")


def _bindable(unit) -> bool:
    if isinstance(unit, RemoteFetch):
        return True
    if isinstance(unit, LocalUnion):
        return all(_bindable(u) for u in unit.units)
    return False


def decompose(q: Query, strategy: str = "hash") -> FederatedPlan:
    return Planner(strategy).decompose(q)
