"""Fan-out and balance measurements over a shard assignment."""

from __future__ import annotations

import statistics
from dataclasses import dataclass

from ..graph import Graph, eval_bgp
from ..terms import Variable
from .materialize import ShardAssignment
from .rules import KIND_ORDER


def pattern_matches(graph: Graph, tp) -> bool:
    """True when a single triple pattern has at least one match in `graph`."""
    consts = [None if isinstance(x, Variable) else x for x in tp]
    names = [x.name if isinstance(x, Variable) else None for x in tp]
    for triple in graph.triples(*consts):
        seen = {}
        if all(n is None or seen.setdefault(n, v) == v for n, v in zip(names, triple)):
            return True
    return False


def ground_triples(bgp, mu: dict):
    for tp in bgp:
        yield tuple(mu[x.name] if isinstance(x, Variable) else x for x in tp)


def realized_shards(bgp, solutions, owner: dict) -> set:
    """Shards holding the ground triples of the given solutions."""
    out = set()
    for mu in solutions:
        for t in ground_triples(bgp, mu):
            out.add(owner[t])
    return out


@dataclass
class FanOut:
    query: str
    fanout: int  # f(Q)
    realized: int
    matched: tuple  # shard ids contributing to the full answer
    answers: int  # |eval_bgp(G, Q)|

    def to_json(self) -> dict:
        return {"query": self.query, "f": self.fanout, "realized": self.realized,
                "matched": list(self.matched), "answers": self.answers}


def compute_fanout(query, assignment: ShardAssignment, graph: Graph, solutions=None) -> FanOut:
    """f(Q) from per-pattern matches on every shard; realized fan-out from the full answer over G."""
    bgp = query.bgp
    per_pattern = set()
    for shard in assignment.shards:
        if any(pattern_matches(shard.graph, tp) for tp in bgp):
            per_pattern.add(shard.id)
    if solutions is None:
        solutions = eval_bgp(graph, bgp)
    matched = realized_shards(bgp, solutions, assignment.owner)
    order = [s.id for s in assignment.shards]
    return FanOut(query.id, len(per_pattern), len(matched),
                  tuple(sorted(matched, key=order.index)), len(solutions))


def composition(rules) -> dict:
    """Percentage of rule shards per kind (base shard excluded)."""
    counts = {k: 0 for k in KIND_ORDER}
    for r in rules:
        counts[r.kind] += r.shard_count
    total = sum(counts.values())
    return {k: (100.0 * v / total if total else 0.0) for k, v in counts.items()}


def coefficient_of_variation(sizes) -> float:
    """Population standard deviation over mean; 0 for empty or all-zero input."""
    sizes = list(sizes)
    if not sizes:
        return 0.0
    mean = statistics.fmean(sizes)
    return statistics.pstdev(sizes) / mean if mean else 0.0


def distribution(values) -> dict:
    values = list(values)
    if not values:
        return {"count": 0, "mean": None, "median": None, "min": None, "max": None}
    return {"count": len(values), "mean": statistics.fmean(values), "median": statistics.median(values),
            "min": min(values), "max": max(values)}
