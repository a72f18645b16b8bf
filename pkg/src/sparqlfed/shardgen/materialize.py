"""Routing every data triple to exactly one shard."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

from ..graph import Graph
from .rules import HASH_SPEC, PRECEDENCE, Router, ShardingRule

log = logging.getLogger(__name__)

BASE = "base"


@dataclass
class Shard:
    id: str
    graph: Graph
    rule: Optional[int] = None  # index into the selected rules; None for the base shard
    kind: str = "base"
    side: Optional[int] = None
    selector: str = ""  # predicate or class IRI, or "hash mod k == i"

    def to_json(self) -> dict:
        return {"id": self.id, "triples": len(self.graph), "rule": self.rule, "kind": self.kind,
                "side": self.side, "selector": self.selector}


@dataclass
class ShardAssignment:
    rules: list
    shards: list  # rule shards in rule order, base shard last
    owner: dict = field(repr=False, default_factory=dict)  # triple -> shard id
    warnings: list = field(default_factory=list)

    @property
    def base(self) -> Shard:
        return self.shards[-1]

    def shard(self, shard_id: str) -> Shard:
        for s in self.shards:
            if s.id == shard_id:
                return s
        raise KeyError(shard_id)

    def shard_of(self, triple) -> str:
        return self.owner[triple]

    def rule_shards(self) -> list:
        return [s for s in self.shards if s.rule is not None]

    def routing_description(self) -> dict:
        return {"precedence": PRECEDENCE, "hash": HASH_SPEC, "unmatched": BASE}


def _shard_id(idx: int, rule: ShardingRule, side: int) -> str:
    return f"r{idx + 1}-{rule.kind}-{side}"


def _selector(rule: ShardingRule, side: int) -> str:
    if rule.kind == "horizontal":
        return f"instances of <{rule.params[0]}> with hash mod {rule.k} == {side}"
    if rule.kind == "vertical":
        return f"predicate <{rule.params[side]}>"
    return f"subjects typed <{rule.params[side]}>"


def materialize_shards(graph: Graph, rules, typing_graph: Graph | None = None) -> ShardAssignment:
    """Partition `graph` under the selected rules.

    `typing_graph` supplies class membership (pass the type closure); it
    defaults to `graph` itself.
    """
    rules = list(rules)
    router = Router(rules, typing_graph if typing_graph is not None else graph)
    shards = []
    by_slot = {}
    for idx, r in enumerate(rules):
        for side in range(r.shard_count):
            s = Shard(_shard_id(idx, r, side), Graph(), idx, r.kind, side, _selector(r, side))
            shards.append(s)
            by_slot[(idx, side)] = s
    base = Shard(BASE, Graph())
    shards.append(base)
    owner = {}
    for t in graph:
        slot = router.route(t)
        target = base if slot is None else by_slot[slot]
        target.graph.add(*t)
        owner[t] = target.id
    warnings = []
    for subject in sorted(router.conflicts, key=str):
        classes = sorted(router.conflicts[subject])
        warnings.append(f"{subject} is an instance of {', '.join(classes)}; routed by <{classes[0]}>")
    for w in warnings:
        log.warning(w)
    return ShardAssignment(rules, shards, owner, warnings)
