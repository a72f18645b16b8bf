"""Random (dataset, ontology, workload) fixtures for the shard pipeline tests."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from sparqlfed.graph import Graph
from sparqlfed.shardgen import Axioms, make_query
from sparqlfed.terms import IRI, RDF_TYPE, RDFS_DOMAIN, RDFS_RANGE, Literal

TYPE = IRI(RDF_TYPE)


@dataclass
class Fixture:
    seed: int
    data: Graph
    ontology: Graph
    queries: list
    ns: str


def _sparql(patterns, ns) -> str:
    def t(x):
        if isinstance(x, str):
            return x
        if isinstance(x, IRI):
            return f"<{x.value}>"
        return '"' + x.lexical + '"'
    body = " . ".join(" ".join(t(x) for x in tp) for tp in patterns)
    return f"SELECT * WHERE {{ {body} }}"


def make_fixture(seed: int, min_triples: int = 100, max_triples: int = 10_000,
                 min_queries: int = 5, max_queries: int = 20) -> Fixture:
    rng = random.Random(seed)
    ns = f"http://example.org/f{seed}/"
    target = int(math.exp(rng.uniform(math.log(min_triples), math.log(max_triples))))
    n_classes = rng.randint(2, 5)
    classes = [IRI(f"{ns}C{i}") for i in range(n_classes)]
    # literal-valued predicates and links, each with a domain (and links with a range)
    attrs = []  # (predicate, domain, vocabulary)
    links = []  # (predicate, domain, range)
    for i in range(rng.randint(2, 6)):
        attrs.append((IRI(f"{ns}a{i}"), rng.choice(classes), [f"v{j}" for j in range(rng.randint(2, 6))]))
    for i in range(rng.randint(1, 4)):
        links.append((IRI(f"{ns}l{i}"), rng.choice(classes), rng.choice(classes)))
    onto = Graph()
    for p, dom, _ in attrs:
        onto.add(p, IRI(RDFS_DOMAIN), dom)
    for p, dom, rng_c in links:
        onto.add(p, IRI(RDFS_DOMAIN), dom)
        onto.add(p, IRI(RDFS_RANGE), rng_c)
    per_entity = 1 + len(attrs) / n_classes + len(links) / n_classes
    n_entities = max(n_classes * 2, int(target / per_entity))
    members = {c: [] for c in classes}
    entities = []
    for e in range(n_entities):
        c = classes[e % n_classes]
        node = IRI(f"{ns}e{e}")
        members[c].append(node)
        entities.append((node, c))
    g = Graph()
    for node, c in entities:
        if rng.random() < 0.85:  # the rest get their type from the domain axioms
            g.add(node, TYPE, c)
        for p, dom, vocab in attrs:
            if dom == c and rng.random() < 0.9:
                g.add(node, p, Literal(rng.choice(vocab)))
        for p, dom, rng_c in links:
            if dom == c and rng.random() < 0.7:
                g.add(node, p, rng.choice(members[rng_c]) if members[rng_c] else node)
    n_queries = rng.randint(min_queries, max_queries)
    queries = []
    for qi in range(n_queries):
        patterns = _random_bgp(rng, classes, attrs, links)
        queries.append(make_query(f"q{qi}", _sparql(patterns, ns), axioms=Axioms.from_graphs(onto)))
    return Fixture(seed, g, onto, queries, ns)


def _random_bgp(rng, classes, attrs, links) -> list:
    patterns = []
    var_class = {"?x0": rng.choice(classes)}
    frontier = ["?x0"]
    size = rng.randint(1, 4)
    while len(patterns) < size and frontier:
        v = rng.choice(frontier)
        c = var_class[v]
        options = ["type"]
        options += ["attr"] * sum(1 for _, d, _ in attrs if d == c)
        options += ["link"] * sum(1 for _, d, _ in links if d == c)
        kind = rng.choice(options)
        if kind == "type":
            tp = (v, TYPE, c)
        elif kind == "attr":
            p, _, vocab = rng.choice([a for a in attrs if a[1] == c])
            obj = Literal(rng.choice(vocab + ["missing"])) if rng.random() < 0.5 else f"?o{len(patterns)}"
            tp = (v, p, obj)
        else:
            p, _, target = rng.choice([ln for ln in links if ln[1] == c])
            nv = f"?x{len(var_class)}"
            var_class[nv] = target
            frontier.append(nv)
            tp = (v, p, nv)
        if tp not in patterns:
            patterns.append(tp)
        elif len(options) == 1:
            break
    return patterns
