"""In-memory RDF graph with predicate/subject/object indexes and a BGP evaluator.

The evaluator here is the local oracle: the endpoint simulator answers with it
and the federation tests compare against it.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from typing import Iterable, Iterator, NamedTuple, Sequence

from .terms import (
    IRI, RDF_TYPE, RDFS_DOMAIN, RDFS_LITERAL, RDFS_RANGE, XSD, BNode, Literal,
    Term, TermError, Variable,
)

log = logging.getLogger(__name__)

_TYPE = IRI(RDF_TYPE)


class Triple(NamedTuple):
    subject: Term
    predicate: IRI
    object: Term


class TriplePattern(NamedTuple):
    subject: object
    predicate: object
    object: object

    def variables(self) -> list[str]:
        return [t.name for t in self if isinstance(t, Variable)]


def check_triple(s, p, o) -> Triple:
    if not isinstance(s, (IRI, BNode)):
        raise TermError(f"subject must be an IRI or blank node: {s!r}")
    if not isinstance(p, IRI):
        raise TermError(f"predicate must be an IRI: {p!r}")
    if not isinstance(o, (IRI, BNode, Literal)):
        raise TermError(f"object must be an RDF term: {o!r}")
    return Triple(s, p, o)


def _nested():
    return defaultdict(set)


class Graph:
    """A set of triples indexed three ways (spo, pos, osp) plus a type index."""

    def __init__(self, triples: Iterable = ()):
        self._triples: set[Triple] = set()
        self._spo = defaultdict(_nested)
        self._pos = defaultdict(_nested)
        self._osp = defaultdict(_nested)
        self._types: dict[Term, set[Term]] = defaultdict(set)
        for t in triples:
            self.add(*t)

    def add(self, s, p, o) -> bool:
        t = check_triple(s, p, o)
        if t in self._triples:
            return False
        self._triples.add(t)
        self._spo[s][p].add(o)
        self._pos[p][o].add(s)
        self._osp[o][s].add(p)
        if p == _TYPE:
            self._types[s].add(o)
        return True

    def discard(self, s, p, o) -> bool:
        t = Triple(s, p, o)
        if t not in self._triples:
            return False
        self._triples.remove(t)
        for index, a, b, c in ((self._spo, s, p, o), (self._pos, p, o, s), (self._osp, o, s, p)):
            bucket = index[a][b]
            bucket.discard(c)
            if not bucket:
                del index[a][b]
                if not index[a]:
                    del index[a]
        if p == _TYPE:
            self._types[s].discard(o)
            if not self._types[s]:
                del self._types[s]
        return True

    def update(self, triples: Iterable) -> None:
        for t in triples:
            self.add(*t)

    def __len__(self):
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __contains__(self, triple) -> bool:
        return tuple(triple) in self._triples

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self._triples == other._triples

    def __repr__(self):
        return f"<Graph {len(self)} triples>"

    def copy(self) -> Graph:
        return Graph(self._triples)

    # index access

    def predicates(self):
        return self._pos.keys()

    def subjects(self):
        return self._spo.keys()

    def objects(self):
        return self._osp.keys()

    def by_predicate(self, p) -> Iterator[Triple]:
        for o, subjects in self._pos.get(p, {}).items():
            for s in subjects:
                yield Triple(s, p, o)

    def by_subject(self, s) -> Iterator[Triple]:
        for p, objects in self._spo.get(s, {}).items():
            for o in objects:
                yield Triple(s, p, o)

    def objects_of(self, s, p) -> set:
        return self._spo.get(s, {}).get(p, set())

    def classes_of(self, s) -> set:
        return self._types.get(s, set())

    def instances_of(self, c) -> set:
        return self._pos.get(_TYPE, {}).get(c, set())

    def count(self, s=None, p=None, o=None) -> int:
        """Number of triples matching, without materializing them where an index allows."""
        if s is None and p is None and o is None:
            return len(self._triples)
        if s is None and o is None:
            return sum(len(v) for v in self._pos.get(p, {}).values())
        if p is None and o is None:
            return sum(len(v) for v in self._spo.get(s, {}).values())
        if s is None and p is None:
            return sum(len(v) for v in self._osp.get(o, {}).values())
        return sum(1 for _ in self.triples(s, p, o))

    def triples(self, s=None, p=None, o=None) -> Iterator[Triple]:
        """Triples matching a pattern; None is a wildcard."""
        if s is not None:
            if p is not None:
                if o is not None:
                    if (s, p, o) in self._triples:
                        yield Triple(s, p, o)
                    return
                for obj in self._spo.get(s, {}).get(p, ()):
                    yield Triple(s, p, obj)
                return
            if o is not None:
                for pred in self._osp.get(o, {}).get(s, ()):
                    yield Triple(s, pred, o)
                return
            yield from self.by_subject(s)
            return
        if p is not None:
            if o is not None:
                for subj in self._pos.get(p, {}).get(o, ()):
                    yield Triple(subj, p, o)
                return
            yield from self.by_predicate(p)
            return
        if o is not None:
            for subj, preds in self._osp.get(o, {}).items():
                for pred in preds:
                    yield Triple(subj, pred, o)
            return
        yield from self._triples

    def estimate(self, s=None, p=None, o=None) -> int:
        if s is not None:
            if p is not None:
                return len(self._spo.get(s, {}).get(p, ()))
            return sum(len(v) for v in self._spo.get(s, {}).values())
        if p is not None:
            if o is not None:
                return len(self._pos.get(p, {}).get(o, ()))
            return self.count(p=p)
        if o is not None:
            return self.count(o=o)
        return len(self._triples)


# --- BGP evaluation -----------------------------------------------------------

def _slot(term):
    """Variable name for pattern slots that bind (variables and query blank nodes)."""
    if isinstance(term, Variable):
        return term.name
    if isinstance(term, BNode):
        return "_:" + term.label
    return None


def _order_patterns(graph: Graph, patterns: Sequence, bound: set) -> list:
    """Greedy ordering: most bound slots first, then smallest index bucket."""
    remaining = list(patterns)
    ordered = []
    bound = set(bound)
    while remaining:
        def cost(tp):
            slots = [_slot(x) for x in tp]
            free = sum(1 for v in slots if v is not None and v not in bound)
            consts = [None if _slot(x) is not None else x for x in tp]
            return (free, graph.estimate(*consts))
        best = min(remaining, key=cost)
        remaining.remove(best)
        ordered.append(best)
        bound.update(v for v in (_slot(x) for x in best) if v is not None)
    return ordered


def eval_bgp(graph: Graph, patterns: Sequence, seeds: Iterable[dict] | None = None) -> list[dict]:
    """All bindings mu with mu(patterns) contained in graph.

    `seeds` are partial bindings to extend (index nested-loop join); the result
    is the join of the seeds with the BGP. Query blank nodes behave as
    non-projected variables and are dropped from the output.
    """
    solutions = [dict(s) for s in seeds] if seeds is not None else [{}]
    if not patterns or not solutions:
        return solutions
    seeded = set().union(*(s.keys() for s in solutions)) if seeds is not None else set()
    for tp in _order_patterns(graph, patterns, seeded):
        slots = [_slot(x) for x in tp]
        nxt = []
        for mu in solutions:
            key = [mu.get(v) if v is not None else x for v, x in zip(slots, tp)]
            for triple in graph.triples(*key):
                ext = None
                for v, value in zip(slots, triple):
                    if v is None:
                        continue
                    current = (ext if ext is not None else mu).get(v)
                    if current is None:
                        if ext is None:
                            ext = dict(mu)
                        ext[v] = value
                    elif current != value:
                        break
                else:
                    nxt.append(ext if ext is not None else mu)
        solutions = nxt
        if not solutions:
            break
    if any(isinstance(x, BNode) for tp in patterns for x in tp):
        solutions = [{k: v for k, v in mu.items() if not k.startswith("_:")} for mu in solutions]
    return solutions


# --- type closure -------------------------------------------------------------

def _is_class_iri(term) -> bool:
    return isinstance(term, IRI) and term.value != RDFS_LITERAL and not term.value.startswith(XSD)


def infer_type_closure(graph: Graph, ontology: Graph | None = None) -> Graph:
    """Graph plus rdf:type triples implied by rdfs:domain / rdfs:range, to fixpoint."""
    axioms = Graph(graph.triples(p=IRI(RDFS_DOMAIN)))
    axioms.update(graph.triples(p=IRI(RDFS_RANGE)))
    if ontology is not None:
        axioms.update(ontology.triples(p=IRI(RDFS_DOMAIN)))
        axioms.update(ontology.triples(p=IRI(RDFS_RANGE)))
    domains = defaultdict(set)
    ranges = defaultdict(set)
    for s, _, c in axioms.triples(p=IRI(RDFS_DOMAIN)):
        if _is_class_iri(c):
            domains[s].add(c)
    for s, _, c in axioms.triples(p=IRI(RDFS_RANGE)):
        if _is_class_iri(c):
            ranges[s].add(c)
    out = graph.copy()
    frontier = list(graph)
    while frontier:
        added = []
        for s, p, o in frontier:
            for c in domains.get(p, ()):
                if out.add(s, _TYPE, c):
                    added.append(Triple(s, _TYPE, c))
            if isinstance(o, (IRI, BNode)):
                for c in ranges.get(p, ()):
                    if out.add(o, _TYPE, c):
                        added.append(Triple(o, _TYPE, c))
        frontier = added
    return out
