import random
import time

import pytest
from hypothesis import given, settings, strategies as st

from sparqlfed.client import SparqlClient
from sparqlfed.federation import FederationEngine, FederationError, stats_classify_trivial
from sparqlfed.graph import Graph, TriplePattern, eval_bgp
from sparqlfed.sim import Features, SimConfig, SimEndpoint
from sparqlfed.sparql import Query, build_trivial_federation, parse_query, serialize_query
from sparqlfed.terms import IRI, Literal, Variable

from helpers import as_set, deployment

EX = "http://example.org/"
P = [IRI(f"{EX}p{i}") for i in range(3)]
NODES = [IRI(f"{EX}n{i}") for i in range(12)]


def random_graph(seed=7, n=120) -> Graph:
    rng = random.Random(seed)
    g = Graph()
    while len(g) < n:
        g.add(rng.choice(NODES), rng.choice(P), rng.choice(NODES + [Literal(str(rng.randint(0, 3)))]))
    return g


def split(g: Graph, parts: int, seed=1) -> list[Graph]:
    rng = random.Random(seed)
    out = [Graph() for _ in range(parts)]
    for t in sorted(g, key=str):
        out[rng.randrange(parts)].add(*t)
    return out


GRAPH = random_graph()


@pytest.fixture(scope="module")
def shards():
    with deployment(split(GRAPH, 3)) as sims:
        yield sims


@pytest.fixture(scope="module")
def client():
    with SparqlClient(timeout=10) as c:
        yield c


VARS = [Variable(n) for n in "xyz"]
patterns = st.builds(TriplePattern, st.sampled_from(VARS + NODES[:3]), st.sampled_from(P + VARS[:1]),
                     st.sampled_from(VARS + NODES[:3]))
bgps = st.lists(patterns, min_size=1, max_size=3).filter(
    lambda ps: any(isinstance(t, Variable) for tp in ps for t in tp))


@settings(max_examples=25)
@given(bgps)
def test_hash_and_bound_equal_oracle(shards, client, bgp):
    fed = Query("SELECT", build_trivial_federation(bgp, [s.url for s in shards]))
    engine = FederationEngine(client)
    expected = as_set(eval_bgp(GRAPH, bgp))
    for strategy in ("hash", "bound"):
        res, stats = engine.run(fed, 10, strategy)
        assert as_set(res.bindings) == expected, strategy
        assert stats.mode in ("federated", "direct")


def test_direct_mode_forwards_once(shards, client):
    s = shards[0]
    s.clear_log()
    q = f"SELECT * WHERE {{ SERVICE <{s.url}> {{ ?a <{EX}p0> ?b }} }}"
    res, stats = FederationEngine(client).run(q)
    assert stats.mode == "direct" and stats.total_requests == 1
    assert as_set(res.bindings) == as_set(eval_bgp(s.config.graph, [TriplePattern(Variable("a"), P[0], Variable("b"))]))
    assert all("SERVICE" not in e.query for e in s.request_log())


def test_no_service_is_rejected(client):
    with pytest.raises(FederationError) as info:
        FederationEngine(client).run("SELECT * WHERE { ?s ?p ?o }")
    assert info.value.kind == "no-service"


def test_silent_service_on_down_endpoint(client):
    with deployment([GRAPH]) as (up,), SimEndpoint(SimConfig(availability="down")) as down:
        q = (f"SELECT * WHERE {{ SERVICE <{up.url}> {{ ?a <{EX}p0> ?b }} "
             f"SERVICE SILENT <{down.url}> {{ ?a <{EX}p1> ?c }} }}")
        res, stats = FederationEngine(client).run(q)
        assert res.bindings == []  # SILENT failure contributes no solutions
        assert stats.endpoints[down.url].errors == ["unavailable"]
        loud = q.replace("SERVICE SILENT", "SERVICE")
        with pytest.raises(FederationError) as info:
            FederationEngine(client).run(loud)
        assert info.value.kind == "unavailable" and info.value.to_json()["endpoint"] == down.url


def test_silent_in_union_keeps_other_branch(client):
    with deployment([GRAPH]) as (up,), SimEndpoint(SimConfig(availability="down")) as down:
        q = (f"SELECT * WHERE {{ {{ SERVICE <{up.url}> {{ ?a <{EX}p0> ?b }} }} UNION "
             f"{{ SERVICE SILENT <{down.url}> {{ ?a <{EX}p0> ?b }} }} }}")
        res, _ = FederationEngine(client).run(q)
    assert as_set(res.bindings) == as_set(eval_bgp(GRAPH, [TriplePattern(Variable("a"), P[0], Variable("b"))]))


def test_bound_join_falls_back_when_values_refused(client):
    left, right = split(GRAPH, 2, seed=3)
    with SimEndpoint(SimConfig(graph=left)) as l, SimEndpoint(SimConfig(graph=right, features=Features(values=False))) as r:
        q = (f"SELECT * WHERE {{ SERVICE <{l.url}> {{ ?a <{EX}p0> ?b }} "
             f"SERVICE <{r.url}> {{ ?b <{EX}p1> ?c }} }}")
        res, stats = FederationEngine(client).run(q, strategy="bound")
    lrows = eval_bgp(left, [TriplePattern(Variable("a"), P[0], Variable("b"))])
    rrows = eval_bgp(right, [TriplePattern(Variable("b"), P[1], Variable("c"))])
    expected = as_set([{**m1, **m2} for m1 in lrows for m2 in rrows if m1["b"] == m2["b"]])
    assert as_set(res.bindings) == expected
    assert stats.fallbacks >= 1


def test_fetches_run_concurrently(client):
    parts = split(GRAPH, 4, seed=5)
    with deployment(parts[:3]) as fast, SimEndpoint(SimConfig(graph=parts[3], latency=1.0)) as slow:
        urls = [s.url for s in fast] + [slow.url]
        tp = TriplePattern(Variable("a"), P[0], Variable("b"))
        fed = Query("SELECT", build_trivial_federation([tp], urls))
        t0 = time.monotonic()
        res, stats = FederationEngine(client).run(fed)
        elapsed = time.monotonic() - t0
    assert elapsed < 1.5
    assert as_set(res.bindings) == as_set(eval_bgp(GRAPH, [tp]))
    assert stats.total_requests == 4


def test_deadline_exceeded(client):
    with SimEndpoint(SimConfig(graph=GRAPH, latency=1.0)) as slow, deployment([GRAPH]) as (fast,):
        q = (f"SELECT * WHERE {{ SERVICE <{fast.url}> {{ ?a <{EX}p0> ?b }} "
             f"SERVICE <{slow.url}> {{ ?b <{EX}p1> ?c }} }}")
        with pytest.raises(FederationError) as info:
            FederationEngine(client).run(q, deadline=0.3)
    assert info.value.kind in ("timeout", "deadline")


def test_modifiers_applied_locally(shards, client):
    tp = TriplePattern(Variable("a"), P[0], Variable("b"))
    fed = build_trivial_federation([tp], [s.url for s in shards])
    q = Query("SELECT", fed, ("a",), distinct=True, limit=3)
    res, _ = FederationEngine(client).run(q)
    expected = {b["a"] for b in eval_bgp(GRAPH, [tp])}
    assert len(res.bindings) == min(3, len(expected))
    assert {b["a"] for b in res.bindings} <= expected
    count = parse_query(serialize_query(Query("SELECT", fed)).replace("SELECT *", "SELECT (COUNT(*) AS ?n)"))
    res, _ = FederationEngine(client).run(count)
    assert int(res.bindings[0]["n"].lexical) == len(eval_bgp(GRAPH, [tp]))


def test_trivial_classifier():
    urls = ["http://e1/sparql", "http://e2/sparql"]
    tps = [TriplePattern(Variable("a"), P[0], Variable("b")), TriplePattern(Variable("b"), P[1], Variable("c"))]
    fed = Query("SELECT", build_trivial_federation(tps, urls))
    assert stats_classify_trivial(fed, urls)
    assert not stats_classify_trivial(fed, urls + ["http://e3/sparql"])
    assert not stats_classify_trivial(fed, urls[:1])
    handwritten = parse_query(f"SELECT * WHERE {{ SERVICE <{urls[0]}> {{ ?a <{EX}p0> ?b . ?b <{EX}p1> ?c }} "
                              f"SERVICE <{urls[1]}> {{ ?b <{EX}p1> ?c }} }}")
    assert not stats_classify_trivial(handwritten, urls)
