"""End-to-end shard generation: analysis, candidates, cover, materialization, report."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from ..graph import Graph, eval_bgp, infer_type_closure
from ..turtle import serialize_ntriples, serialize_turtle
from .materialize import ShardAssignment, materialize_shards
from .metrics import (
    coefficient_of_variation, composition, compute_fanout, distribution, ground_triples,
)
from .rules import Candidate, Router, ShardingRule, generate_candidates
from .setcover import EXACT_LIMIT, solve_set_cover
from .workload import WorkloadQuery, applicability

log = logging.getLogger(__name__)

MANIFEST_FORMAT = "sparqlfed-shards/1"


def _distinct_ground(q: WorkloadQuery, solutions) -> set:
    out = set()
    for mu in solutions:
        out.update(ground_triples(q.bgp, mu))
    return out


def rule_federates(rule: ShardingRule, q: WorkloadQuery, ground: set, typing_graph: Graph) -> bool:
    """Does `rule` alone force q to touch two shards?

    Queries with an empty answer are federated vacuously once the rule applies.
    """
    if not rule.applies_to(q):
        return False
    if not ground:
        return True
    router = Router([rule], typing_graph)
    slots = set()
    for t in ground:
        slots.add(router.route(t))
        if len(slots) >= 2:
            return True
    return False


def coverage(candidates, queries, grounds: dict, typing_graph: Graph) -> list[Candidate]:
    out = []
    for rule in candidates:
        covered = {q.id for q in queries if rule_federates(rule, q, grounds[q.id], typing_graph)}
        out.append(Candidate(rule, covered))
    return out


def _repair(candidates, selected, failing, grounds, assignment) -> list:
    """Resolve queries that lost federation once all selected rules were combined.

    A culprit is a selected rule that does not cover the failing query but
    captured some of its triples through routing precedence. A culprit is
    dropped from the pool when that strands fewer queries than it breaks;
    every other failing query is withdrawn from the rules that claimed it.
    """
    pool = list(candidates)
    blame: dict = {}
    for qid in failing:
        owners = {assignment.shard(assignment.owner[t]).rule for t in grounds[qid]}
        for i, c in enumerate(selected):
            if i in owners and qid not in c.covered:
                blame.setdefault(i, set()).add(qid)
    rescued = set()
    for i in sorted(blame, key=lambda i: (-len(blame[i]), i)):
        c = selected[i]
        rest = [o for o in pool if o is not c]
        others = set().union(*(o.covered for o in rest)) if rest else set()
        if len(c.covered - others) < len(blame[i]):
            pool = rest
            rescued |= blame[i]
    for qid in failing:
        if qid not in rescued:
            for c in selected:
                c.covered.discard(qid)
    return [c for c in pool if c.covered]


@dataclass
class ShardgenResult:
    data: Graph
    graph: Graph  # partitioned graph: data plus inferred types when closure is on
    queries: list
    candidates: list
    selected: list
    method: str
    assignment: ShardAssignment
    fanouts: dict
    uncovered: list
    warnings: list = field(default_factory=list)
    repairs: int = 0
    k: int = 2
    closure: bool = True
    exact_limit: int = EXACT_LIMIT

    def covered_by(self, qid: str) -> list:
        return [i for i, c in enumerate(self.selected) if qid in c.covered]

    @property
    def rules(self) -> list:
        return [c.rule for c in self.selected]

    @property
    def all_covered(self) -> bool:
        return not self.uncovered

    def metrics(self) -> dict:
        shards = self.assignment.shards
        nonempty = [s for s in shards if len(s.graph)]
        fan = [self.fanouts[q.id] for q in self.queries]
        app = [applicability(q) for q in self.queries]
        n = len(self.queries)
        return {
            "rule_count": len(self.selected),
            "shard_count": len(nonempty),
            "shard_count_with_empty": len(shards),
            "composition": composition(self.rules),
            "shard_size_cv": coefficient_of_variation(len(s.graph) for s in nonempty),
            "fanout": distribution(f.fanout for f in fan),
            "realized_fanout": distribution(f.realized for f in fan),
            "no_match_fraction": (sum(1 for f in fan if f.realized == 0) / n) if n else 0.0,
            "single_shard_fraction": (sum(1 for f in fan if f.realized == 1) / n) if n else 0.0,
            "applicability": {k: (sum(1 for a in app if a[k]) / n if n else 0.0)
                              for k in ("vertical", "class", "horizontal")},
            "coverage": ((n - len(self.uncovered)) / n) if n else 1.0,
        }

    def manifest(self, shard_files: dict | None = None) -> dict:
        shard_files = shard_files or {}
        shards = []
        for s in self.assignment.shards:
            doc = s.to_json()
            if s.id in shard_files:
                doc["file"] = shard_files[s.id]
            shards.append(doc)
        rules = []
        for i, c in enumerate(self.selected):
            doc = c.rule.to_json()
            doc.update(order=i, covers=sorted(c.covered),
                       shards=[s.id for s in self.assignment.shards if s.rule == i])
            rules.append(doc)
        queries = []
        for q in self.queries:
            doc = q.to_json()
            doc.update(covered=q.id not in self.uncovered, covered_by=self.covered_by(q.id),
                       fanout=self.fanouts[q.id].to_json())
            queries.append(doc)
        return {
            "format": MANIFEST_FORMAT,
            "parameters": {"k": self.k, "type_closure": self.closure, "exact_limit": self.exact_limit},
            "input": {"triples": len(self.data), "inferred_type_triples": len(self.graph) - len(self.data),
                      "partitioned_triples": len(self.graph), "queries": len(self.queries)},
            "routing": self.assignment.routing_description(),
            "solver": {"method": self.method, "candidates": len(self.candidates), "repairs": self.repairs},
            "rules": rules,
            "shards": shards,
            "queries": queries,
            "uncovered": list(self.uncovered),
            "metrics": self.metrics(),
            "warnings": list(self.warnings) + list(self.assignment.warnings),
        }


def build_shards(data: Graph, queries: list[WorkloadQuery], ontology: Graph | None = None, k: int = 2,
                 exact_limit: int = EXACT_LIMIT, closure: bool = True) -> ShardgenResult:
    """Select a minimum rule set federating every query and materialize it.

    After materialization every covered query is checked again against the
    combined rules; rules interact through routing precedence, so a query
    that lost federation is withdrawn from the covering rules that claimed it
    and the cover is solved again.
    """
    graph = infer_type_closure(data, ontology) if closure else data
    warnings = []
    untyped = {s for s in graph.subjects() if not graph.classes_of(s)}
    if untyped:
        warnings.append(f"{len(untyped)} subjects have no type after closure; "
                        "their triples can only be routed by vertical rules or land in the base shard")
    solutions = {q.id: eval_bgp(graph, q.bgp) for q in queries}
    grounds = {q.id: _distinct_ground(q, solutions[q.id]) for q in queries}
    candidates = [c for c in coverage(generate_candidates(queries, k), queries, grounds, graph) if c.covered]
    ids = [q.id for q in queries]
    reachable = set().union(*(c.covered for c in candidates)) if candidates else set()
    uncovered = [qid for qid in ids if qid not in reachable]
    repairs = 0
    while True:
        universe = {qid for qid in ids if qid not in uncovered}
        live = [c for c in candidates if c.covered & universe]
        chosen, method = solve_set_cover([c.covered for c in live], universe, exact_limit)
        selected = sorted((live[i] for i in chosen), key=lambda c: c.rule.sort_key())
        assignment = materialize_shards(graph, [c.rule for c in selected], graph)
        failing = [qid for qid in sorted(universe)
                   if grounds[qid] and len({assignment.owner[t] for t in grounds[qid]}) < 2]
        if not failing:
            break
        repairs += 1
        log.info("repair round %d: %d queries lost federation", repairs, len(failing))
        candidates = _repair(candidates, selected, failing, grounds, assignment)
        reachable = set().union(*(c.covered for c in candidates)) if candidates else set()
        uncovered += [qid for qid in ids if qid not in reachable and qid not in uncovered]
    for qid in uncovered:
        warnings.append(f"query {qid}: no sharding rule federates it")
    fanouts = {q.id: compute_fanout(q, assignment, graph, solutions[q.id]) for q in queries}
    return ShardgenResult(data, graph, list(queries), candidates, selected, method, assignment, fanouts,
                          sorted(set(uncovered), key=ids.index), warnings, repairs, k, closure, exact_limit)


def write_outputs(result: ShardgenResult, out_dir: str | Path, void: bool = True) -> dict:
    """Write N-Triples per shard, optional per-shard VoID, manifest.json and deployment.json."""
    from ..void import void_from_graph

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    endpoints = []
    for i, s in enumerate(result.assignment.shards):
        name = f"{s.id}.nt"
        (out / name).write_text(serialize_ntriples(s.graph), encoding="utf-8")
        files[s.id] = name
        if void:
            desc = void_from_graph(s.graph, f"urn:sparqlfed:shard:{s.id}")
            (out / f"{s.id}.void.ttl").write_text(serialize_turtle(desc.to_graph()), encoding="utf-8")
        endpoints.append({"shard_file": name, "port": 0, "label": s.id, "description": s.selector or
                          "triples not matched by any sharding rule"})
    manifest = result.manifest(files)
    (out / "manifest.json").write_text(dumps(manifest), encoding="utf-8")
    (out / "deployment.json").write_text(dumps({"endpoints": endpoints}), encoding="utf-8")
    return manifest


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
