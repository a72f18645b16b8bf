import time

import pytest

from sparqlfed.client import GET_LIMIT, EndpointError, SparqlClient, classify_status, check_endpoint_url
from sparqlfed.graph import Graph
from sparqlfed.sim import Features, SimConfig, SimEndpoint
from sparqlfed.terms import IRI, Literal

EX = "http://example.org/"


def small_graph(n=20) -> Graph:
    g = Graph()
    for i in range(n):
        g.add(IRI(f"{EX}s{i}"), IRI(EX + "p"), Literal(str(i)))
    return g


@pytest.fixture
def sim():
    with SimEndpoint(SimConfig(graph=small_graph())) as s:
        yield s


@pytest.fixture
def client():
    with SparqlClient(timeout=5, backoff=0.05) as c:
        yield c


def methods_seen(client):
    seen = []
    client._http.event_hooks["request"].append(lambda req: seen.append(req.method))
    return seen


def test_short_query_uses_get(sim, client):
    seen = methods_seen(client)
    res = client.execute(sim.url, "SELECT * WHERE { ?s ?p ?o }")
    assert len(res.bindings) == 20 and seen == ["GET"]


def test_long_query_uses_post(sim, client):
    seen = methods_seen(client)
    values = " ".join(f"<{EX}s{i}>" for i in range(200))
    q = f"SELECT ?s ?o WHERE {{ VALUES ?s {{ {values} }} ?s <{EX}p> ?o }}"
    assert len(q) > GET_LIMIT
    res = client.execute(sim.url, q)
    assert len(res.bindings) == 20 and seen == ["POST"]


def test_ask(sim, client):
    assert client.execute(sim.url, f"ASK {{ ?s <{EX}p> ?o }}") is True
    assert client.execute(sim.url, f"ASK {{ ?s <{EX}q> ?o }}") is False


def test_timeout_is_typed():
    with SimEndpoint(SimConfig(graph=small_graph(), latency=1.0)) as s, SparqlClient(timeout=0.3) as c:
        t0 = time.monotonic()
        with pytest.raises(EndpointError) as info:
            c.execute(s.url, "SELECT * WHERE { ?s ?p ?o }")
        assert info.value.kind == "timeout"
        assert time.monotonic() - t0 < 0.9


def test_down_endpoint_is_unavailable(client):
    with SimEndpoint(SimConfig(availability="down")) as s:
        with pytest.raises(EndpointError) as info:
            client.execute(s.url, "ASK {}")
    assert info.value.kind == "unavailable"


def test_closed_port_is_unavailable(client):
    s = SimEndpoint(SimConfig())
    url = s.url
    s.close()
    with pytest.raises(EndpointError) as info:
        client.execute(url, "ASK {}")
    assert info.value.kind == "unavailable"


@pytest.mark.parametrize("features, query", [
    (Features(values=False), "SELECT ?x WHERE { VALUES ?x { 1 } }"),
    (Features(service=False), "SELECT * WHERE { SERVICE <http://127.0.0.1:9/sparql> { ?s ?p ?o } }"),
    (Features(aggregates=False), "SELECT (COUNT(*) AS ?n) WHERE { ?s ?p ?o }"),
])
def test_feature_refusal_is_typed(client, features, query):
    with SimEndpoint(SimConfig(graph=small_graph(), features=features)) as s:
        with pytest.raises(EndpointError) as info:
            client.execute(s.url, query)
    assert info.value.kind == "feature-unsupported" and info.value.status == 400


def test_bad_query_is_http_status(sim, client):
    with pytest.raises(EndpointError) as info:
        client.execute(sim.url, "SELECT * WHERE { ?s ?p }")
    assert info.value.kind == "http-status"
    assert info.value.to_json()["status"] == 400


def test_truncation_flag():
    with SimEndpoint(SimConfig(graph=small_graph(), result_limit=5)) as s, SparqlClient() as c:
        res = c.execute(s.url, "SELECT * WHERE { ?s ?p ?o }")
    assert len(res.bindings) == 5 and res.truncated


def test_row_cap_truncates(sim):
    with SparqlClient(row_cap=7) as c:
        res = c.execute(sim.url, "SELECT * WHERE { ?s ?p ?o }")
    assert len(res.bindings) == 7 and res.truncated


def test_capabilities_probe(client):
    with SimEndpoint(SimConfig(graph=small_graph(), result_limit=10, features=Features(values=False))) as s:
        caps = client.probe_capabilities(s.url)
    assert not caps.values_supported and caps.service_supported and caps.aggregates_supported
    assert caps.result_limit == 10


def test_capabilities_unrestricted(sim, client):
    caps = client.probe_capabilities(sim.url)
    assert caps.values_supported and caps.service_supported and caps.result_limit is None


def test_classify_status():
    assert classify_status(503, "") == "unavailable"
    assert classify_status(400, "SERVICE is not supported") == "feature-unsupported"
    assert classify_status(400, "syntax error") == "http-status"
    assert classify_status(500, "VALUES not supported") == "http-status"


def test_endpoint_url_validation(client):
    with pytest.raises(ValueError):
        check_endpoint_url("ftp://x/sparql")
    with pytest.raises(ValueError):
        client.execute("not a url", "ASK {}")
