"""Shared fixtures: the captured-ships dataset, the DBLP/Wikidata query, simulator deployments."""

from __future__ import annotations

import contextlib

from sparqlfed.graph import Graph, TriplePattern
from sparqlfed.shardgen import ShardingRule, hash_index, materialize_shards
from sparqlfed.sim import Features, SimConfig, SimEndpoint
from sparqlfed.terms import IRI, RDF_TYPE, Literal, Variable

SHIPS = "http://example.org/ships/"
SHIP = IRI(SHIPS + "ship")
DISPOSITION = IRI(SHIPS + "ship#disposition_of_ship")
NAME = IRI(SHIPS + "name")
TYPE = IRI(RDF_TYPE)

CAPTURED_BGP = (
    TriplePattern(Variable("s"), TYPE, SHIP),
    TriplePattern(Variable("s"), DISPOSITION, Literal("Captured")),
)
CAPTURED_SPARQL = (
    f"PREFIX : <{SHIPS}>\n"
    "SELECT ?s WHERE { ?s a :ship . ?s <" + DISPOSITION.value + "> \"Captured\" }"
)

DBLP_WIKIDATA_QUERY = """PREFIX dblp: <http://dblp.org/rdf/schema#>
PREFIX bibo: <http://purl.org/ontology/bibo/>
PREFIX wdt: <http://www.wikidata.org/prop/direct/>
SELECT DISTINCT ?dblpPub ?title ?doi ?wikidataItem WHERE {
  SERVICE <https://dblp.org/sparql> {
    ?dblpPub a bibo:Article ; dblp:author ?author ; dblp:title ?title ; bibo:doi ?doi .
    ?author dblp:name "Tim Berners-Lee" .
  }
  SERVICE <https://query.wikidata.org/sparql> { ?wikidataItem wdt:P356 ?doi . }
}"""

SHIP_SHARDS = 6
CAPTURED_SHARD = 5


def ship_graph(n_ships: int = 30, captured: int = 3, k: int = SHIP_SHARDS, captured_shard: int = CAPTURED_SHARD) -> Graph:
    """Ships typed :ship with a disposition; the Captured ones all hash to `captured_shard` mod k."""
    g = Graph()
    ships = [IRI(f"{SHIPS}s{i}") for i in range(n_ships)]
    chosen = [s for s in ships if hash_index(s, k) == captured_shard][:captured]
    assert len(chosen) == captured, "not enough ships hash to the target shard"
    others = ["Sunk", "Scrapped", "Sold"]
    for i, s in enumerate(ships):
        g.add(s, TYPE, SHIP)
        g.add(s, NAME, Literal(f"Ship {i}"))
        g.add(s, DISPOSITION, Literal("Captured" if s in chosen else others[i % 3]))
    return g


def ship_shards(k: int = SHIP_SHARDS):
    """Horizontal(:ship, k) materialization of the ship graph."""
    g = ship_graph(k=k)
    return g, materialize_shards(g, [ShardingRule.horizontal(SHIP.value, k)])


@contextlib.contextmanager
def deployment(graphs, **config):
    """Start one simulator per graph; `config` overrides apply to all of them."""
    sims = []
    try:
        for g in graphs:
            cfg = {k: v for k, v in config.items() if k != "features"}
            sims.append(SimEndpoint(SimConfig(graph=g, features=config.get("features", Features()), **cfg)))
        yield sims
    finally:
        for s in sims:
            s.close()


def as_set(bindings) -> set:
    return {frozenset(b.items()) for b in bindings}
