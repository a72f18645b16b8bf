import time

import httpx
import pytest

from sparqlfed.catalogue import Catalogue
from sparqlfed.client import EndpointError, SparqlClient
from sparqlfed.graph import Graph
from sparqlfed.sim import SimConfig, SimEndpoint, launch_deployment
from sparqlfed.terms import IRI, Literal
from sparqlfed.turtle import serialize_ntriples

EX = "http://example.org/"


def graph(n=5) -> Graph:
    g = Graph()
    for i in range(n):
        g.add(IRI(f"{EX}s{i}"), IRI(EX + "p"), Literal(str(i)))
    return g


def test_get_post_and_direct_body():
    with SimEndpoint(SimConfig(graph=graph())) as s:
        q = "SELECT * WHERE { ?s ?p ?o }"
        r1 = httpx.get(s.url, params={"query": q})
        r2 = httpx.post(s.url, data={"query": q})
        r3 = httpx.post(s.url, content=q, headers={"Content-Type": "application/sparql-query"})
        for r in (r1, r2, r3):
            assert r.status_code == 200
            assert len(r.json()["results"]["bindings"]) == 5
        assert [e.query for e in s.request_log()] == [q, q, q]


def test_missing_query_and_unknown_path():
    with SimEndpoint(SimConfig()) as s:
        assert httpx.post(s.url, data={}).status_code == 400
        assert httpx.get(s.url.replace("/sparql", "/other")).status_code == 404
        desc = httpx.get(s.url)
        assert desc.status_code == 200 and "sd:endpoint" in desc.text


def test_parse_error_is_400():
    with SimEndpoint(SimConfig()) as s:
        r = httpx.get(s.url, params={"query": "SELECT WHERE"})
    assert r.status_code == 400 and "parse error" in r.text


def test_latency_is_applied():
    with SimEndpoint(SimConfig(graph=graph(), latency=0.3)) as s:
        t0 = time.monotonic()
        httpx.get(s.url, params={"query": "ASK {}"})
        assert time.monotonic() - t0 >= 0.3


def test_flaky_is_deterministic_per_seed():
    def pattern(seed):
        out = []
        with SimEndpoint(SimConfig(graph=graph(), availability="flaky", flaky_probability=0.5, seed=seed)) as s, \
                SparqlClient(timeout=2, max_retries=0) as c:
            for _ in range(12):
                try:
                    c.execute(s.url, "ASK {}")
                    out.append(True)
                except EndpointError as exc:
                    assert exc.kind == "unavailable"
                    out.append(False)
        return out

    a = pattern(11)
    assert a == pattern(11)
    assert True in a and False in a


def test_result_limit_header():
    with SimEndpoint(SimConfig(graph=graph(), result_limit=2)) as s:
        r = httpx.get(s.url, params={"query": "SELECT * WHERE { ?s ?p ?o }"})
    assert len(r.json()["results"]["bindings"]) == 2 and r.headers["X-SPARQL-Truncated"] == "true"


def test_well_known_void_only_when_configured():
    with SimEndpoint(SimConfig(graph=graph(), publish_void="well-known")) as a, SimEndpoint(SimConfig()) as b:
        assert httpx.get(a.url.replace("/sparql", "/.well-known/void")).status_code == 200
        assert httpx.get(b.url.replace("/sparql", "/.well-known/void")).status_code == 404


def test_sim_resolves_service_to_other_sim():
    with SimEndpoint(SimConfig(graph=graph())) as inner, SimEndpoint(SimConfig()) as outer, SparqlClient() as c:
        res = c.execute(outer.url, f"SELECT * WHERE {{ SERVICE <{inner.url}> {{ ?s ?p ?o }} }}")
        assert len(res.bindings) == 5
        assert "SERVICE" not in inner.request_log()[0].query


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(availability="sometimes")
    with pytest.raises(ValueError):
        SimConfig(publish_void="smoke-signals")
    with pytest.raises(ValueError):
        SimConfig(flaky_probability=2)


def test_launch_deployment(tmp_path):
    (tmp_path / "a.nt").write_text(serialize_ntriples(graph(3)))
    (tmp_path / "b.nt").write_text(serialize_ntriples(graph(7)))
    descriptor = {"endpoints": [
        {"shard_file": "a.nt", "label": "A", "description": "first"},
        {"shard_file": "b.nt", "config": {"result_limit": 4}},
    ]}
    with launch_deployment(descriptor, tmp_path) as dep, SparqlClient() as c:
        assert dep.labels == ["A", "b"]
        a, b = dep.urls
        assert len(c.execute(a, "SELECT * WHERE { ?s ?p ?o }").bindings) == 3
        assert c.execute(b, "SELECT * WHERE { ?s ?p ?o }").truncated
        cat = Catalogue(tmp_path / "cat.json")
        dep.register(cat)
        assert cat.urls() == dep.urls and cat.get(a).description == "first"


def test_duplicate_ports_rejected(tmp_path):
    with pytest.raises(ValueError):
        launch_deployment({"endpoints": [{"shard_file": "x", "port": 9999}, {"shard_file": "y", "port": 9999}]})
