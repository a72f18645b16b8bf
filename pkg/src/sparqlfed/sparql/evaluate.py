"""Reference evaluator for the SPARQL subset over an in-memory graph.

The simulator serves queries with this module and tests use it as the
oracle, so both sides of every comparison share one semantics.
"""

from __future__ import annotations

from collections import OrderedDict
from typing import Callable, Iterable, Mapping

from ..graph import Graph, eval_bgp
from ..solutions import SolutionSet, distinct, join, project
from ..terms import IRI, XSD_INTEGER, Literal
from .ast import BGP, Filter, GraphPattern, Join, Query, Service, Union, Values
from .expressions import filter_passes
from .transforms import pattern_variables

# (endpoint IRI, body pattern) -> bindings
ServiceHandler = Callable[[str, object], list]


class ServiceNotAvailable(RuntimeError):
    pass


def evaluate_pattern(graph: Graph, p, seeds: Iterable[dict] | None = None,
                     service: ServiceHandler | None = None,
                     named: Mapping[str, Graph] | None = None) -> list[dict]:
    """Solutions of pattern `p`, joined with `seeds` when given."""
    if isinstance(p, BGP):
        return eval_bgp(graph, p.patterns, seeds)
    if isinstance(p, Join):
        rows = list(seeds) if seeds is not None else None
        # inline data first: it is the cheapest way to seed the rest
        ordered = sorted(p.children, key=lambda c: not isinstance(c, Values))
        for child in ordered:
            rows = evaluate_pattern(graph, child, rows, service, named)
            if not rows:
                return []
        return rows if rows is not None else [{}]
    if isinstance(p, Union):
        seeds = list(seeds) if seeds is not None else None
        out = []
        for branch in p.branches:
            out.extend(evaluate_pattern(graph, branch, seeds, service, named))
        return out
    rows = _unseeded(graph, p, service, named)
    return join(seeds, rows) if seeds is not None else rows


def _unseeded(graph, p, service, named) -> list[dict]:
    if isinstance(p, Filter):
        inner = evaluate_pattern(graph, p.pattern, None, service, named)
        return [mu for mu in inner if filter_passes(p.expr, mu)]
    if isinstance(p, Values):
        return [{v: t for v, t in zip(p.variables, row) if t is not None} for row in p.rows]
    if isinstance(p, Service):
        if service is None:
            if p.silent:
                return []
            raise ServiceNotAvailable(f"no handler for SERVICE <{p.endpoint.value}>")
        try:
            return list(service(p.endpoint.value, p.pattern))
        except Exception:
            if p.silent:
                return []
            raise
    if isinstance(p, GraphPattern):
        named = named or {}
        if isinstance(p.name, IRI):
            g = named.get(p.name.value)
            return [] if g is None else evaluate_pattern(g, p.pattern, None, service, named)
        out = []
        for name in sorted(named):
            var = p.name.name
            for mu in evaluate_pattern(named[name], p.pattern, None, service, named):
                bound = mu.get(var)
                if bound is None:
                    mu = dict(mu)
                    mu[var] = IRI(name)
                elif bound != IRI(name):
                    continue
                out.append(mu)
        return out
    raise TypeError(f"unknown pattern node {p!r}")


def _group_rows(q: Query, rows: list[dict]) -> list[dict]:
    groups: OrderedDict = OrderedDict()
    for mu in rows:
        key = tuple(mu.get(v) for v in q.group_by)
        groups.setdefault(key, []).append(mu)
    if not groups and not q.group_by:
        groups[()] = []
    out = []
    for key, members in groups.items():
        row = {v: t for v, t in zip(q.group_by, key) if t is not None}
        for agg in q.aggregates:
            if agg.var is None:
                n = len(distinct(members)) if agg.distinct else len(members)
            else:
                values = [mu[agg.var] for mu in members if mu.get(agg.var) is not None]
                n = len(set(values)) if agg.distinct else len(values)
            row[agg.alias] = Literal(str(n), XSD_INTEGER)
        out.append(row)
    return out


def apply_modifiers(q: Query, rows: list[dict]) -> SolutionSet | bool:
    """Grouping, projection, DISTINCT, OFFSET and LIMIT, in that order."""
    if q.form == "ASK":
        start = q.offset or 0
        window = rows[start:] if q.limit is None else rows[start:start + q.limit]
        return bool(window)
    if q.aggregates or q.group_by:
        rows = _group_rows(q, rows)
    variables = q.output_variables()
    if variables is None:
        variables = pattern_variables(q.pattern)
    rows = project(rows, variables)
    if q.distinct:
        rows = distinct(rows)
    if q.offset:
        rows = rows[q.offset:]
    if q.limit is not None:
        rows = rows[:q.limit]
    return SolutionSet(list(variables), rows)


def evaluate_query(graph: Graph, q: Query, service: ServiceHandler | None = None,
                   named: Mapping[str, Graph] | None = None) -> SolutionSet | bool:
    return apply_modifiers(q, evaluate_pattern(graph, q.pattern, None, service, named))


__all__ = ["evaluate_pattern", "apply_modifiers", "evaluate_query", "ServiceNotAvailable"]
