"""Sharding rules, triple routing, and candidate generation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

from ..graph import Graph, Triple
from ..terms import IRI, BNode
from .workload import WorkloadQuery, applicability

log = logging.getLogger(__name__)

KIND_ORDER = {"vertical": 0, "class": 1, "horizontal": 2}
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
HASH_SPEC = {
    "function": "FNV-1a 64-bit",
    "input": "UTF-8 bytes of the subject IRI (blank nodes: their label)",
    "index": "hash mod k",
}
PRECEDENCE = ["vertical", "class", "horizontal", "then rule selection order"]


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def subject_key(term) -> str:
    if isinstance(term, IRI):
        return term.value
    if isinstance(term, BNode):
        return term.label
    raise TypeError(f"not a subject: {term!r}")


def hash_index(term, k: int) -> int:
    return fnv1a64(subject_key(term).encode("utf-8")) % k


@dataclass(frozen=True)
class ShardingRule:
    """Vertical(p1, p2), Class(c1, c2) or Horizontal(c, k)."""

    kind: str
    params: tuple  # (p1, p2), (c1, c2) or (c,)
    k: int = 2

    def __post_init__(self):
        if self.kind not in KIND_ORDER:
            raise ValueError(f"unknown rule kind {self.kind!r}")
        if self.kind in ("vertical", "class"):
            if len(self.params) != 2 or self.params[0] == self.params[1]:
                raise ValueError(f"{self.kind} rule needs two distinct IRIs")
            object.__setattr__(self, "k", 2)
        elif len(self.params) != 1 or self.k < 2:
            raise ValueError("horizontal rule needs one class and k >= 2")

    @classmethod
    def vertical(cls, p1: str, p2: str) -> "ShardingRule":
        return cls("vertical", tuple(sorted((p1, p2))))

    @classmethod
    def klass(cls, c1: str, c2: str) -> "ShardingRule":
        return cls("class", tuple(sorted((c1, c2))))

    @classmethod
    def horizontal(cls, c: str, k: int = 2) -> "ShardingRule":
        return cls("horizontal", (c,), k)

    @property
    def shard_count(self) -> int:
        return self.k

    def sort_key(self) -> tuple:
        return (KIND_ORDER[self.kind], self.params, self.k)

    def label(self) -> str:
        name = {"vertical": "Vertical", "class": "Class", "horizontal": "Horizontal"}[self.kind]
        args = ", ".join(f"<{p}>" for p in self.params)
        return f"{name}({args}, k={self.k})" if self.kind == "horizontal" else f"{name}({args})"

    def to_json(self) -> dict:
        out = {"kind": self.kind, "label": self.label()}
        if self.kind == "vertical":
            out["predicates"] = list(self.params)
        elif self.kind == "class":
            out["classes"] = list(self.params)
        else:
            out["class"] = self.params[0]
            out["k"] = self.k
        return out

    def applies_to(self, q: WorkloadQuery) -> bool:
        """Syntactic applicability of this rule to a query (dominance rule included)."""
        app = applicability(q)
        if self.kind == "vertical":
            return set(self.params) <= q.predicates
        if self.kind == "class":
            return set(self.params) <= q.classes
        return app["horizontal"] and not app["class"] and self.params[0] in q.classes


class Router:
    """Maps triples to (rule index, side) under fixed precedence; None means base shard.

    Class membership is read from `typing_graph` (normally the type closure).
    """

    def __init__(self, rules: Iterable[ShardingRule], typing_graph: Graph):
        self.rules = list(rules)
        self.types = typing_graph
        self._vertical = {}
        self._class_rules = []
        self._horizontal = []
        self.conflicts: dict = {}  # subject -> classes that competed
        for idx, r in enumerate(self.rules):
            if r.kind == "vertical":
                for side, p in enumerate(r.params):
                    self._vertical.setdefault(IRI(p), (idx, side))
            elif r.kind == "class":
                self._class_rules.append((idx, r))
            else:
                self._horizontal.append((idx, r))

    def route(self, t: Triple):
        s, p, _ = t
        hit = self._vertical.get(p)
        if hit is not None:
            return hit
        classes = None
        if self._class_rules or self._horizontal:
            classes = {c.value for c in self.types.classes_of(s) if isinstance(c, IRI)}
        for idx, r in self._class_rules:
            sides = [side for side, c in enumerate(r.params) if c in classes]
            if len(sides) == 2:
                # instance of both classes: the lexicographically smaller class wins
                self.conflicts.setdefault(s, set()).update(r.params)
                return (idx, 0)
            if sides:
                return (idx, sides[0])
        for idx, r in self._horizontal:
            if r.params[0] in classes:
                return (idx, hash_index(s, r.k))
        return None


def generate_candidates(queries: list[WorkloadQuery], k: int = 2) -> list[ShardingRule]:
    """Rules sourced from the queries, deduplicated by their parameters, in sort order."""
    found = set()
    for q in queries:
        app = applicability(q)
        preds = sorted(q.predicates)
        classes = sorted(q.classes)
        for i, p1 in enumerate(preds):
            for p2 in preds[i + 1:]:
                found.add(ShardingRule.vertical(p1, p2))
        for i, c1 in enumerate(classes):
            for c2 in classes[i + 1:]:
                found.add(ShardingRule.klass(c1, c2))
        if app["horizontal"] and not app["class"]:
            for c in classes:
                found.add(ShardingRule.horizontal(c, k))
    return sorted(found, key=ShardingRule.sort_key)


@dataclass
class Candidate:
    rule: ShardingRule
    covered: set = field(default_factory=set)  # query ids
