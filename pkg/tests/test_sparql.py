import pytest
from hypothesis import given, strategies as st

from sparqlfed.federation import LocalJoin, RemoteFetch, decompose
from sparqlfed.graph import TriplePattern
from sparqlfed.lexer import MalformedService, ParseError, UnbalancedBraces, UndefinedPrefix, UnsupportedFeature
from sparqlfed.sparql import (
    BGP, BinOp, Call, Filter, Join, Not, Query, Service, Union, Values, build_trivial_federation,
    certain_variables, classify_splits, count_services, evaluate_query, parse_query, serialize_query,
    service_endpoints, triple_patterns, unwrap_single_service,
)
from sparqlfed.sparql.expressions import ExprError, evaluate, filter_passes
from sparqlfed.terms import IRI, XSD_INTEGER, Literal, Variable
from sparqlfed.turtle import parse_turtle

from helpers import DBLP_WIKIDATA_QUERY

EX = "http://example.org/"


def test_dblp_wikidata_query_structure():
    q = parse_query(DBLP_WIKIDATA_QUERY)
    assert count_services(q) == 2
    assert service_endpoints(q) == ["https://dblp.org/sparql", "https://query.wikidata.org/sparql"]
    report = classify_splits(q)
    assert report.conjunctive and not report.disjunctive
    assert q.distinct and q.output_variables() == ["dblpPub", "title", "doi", "wikidataItem"]


def test_dblp_wikidata_plan():
    plan = decompose(parse_query(DBLP_WIKIDATA_QUERY))
    counts = plan.counts()
    assert counts["RemoteFetch"] == 2 and counts["LocalJoin"] == 1
    join = next(u for u in plan.units() if isinstance(u, LocalJoin))
    assert join.shared == ("doi",)
    fetches = [u for u in plan.units() if isinstance(u, RemoteFetch)]
    assert {f.endpoint for f in fetches} == {"https://dblp.org/sparql", "https://query.wikidata.org/sparql"}


def test_round_trip_fixed_query():
    q = parse_query(DBLP_WIKIDATA_QUERY)
    assert parse_query(serialize_query(q)) == q


def test_limit_zero_and_offset():
    g = parse_turtle("@prefix : <http://example.org/> . :a :p 1 . :b :p 2 . :c :p 3 .")
    assert evaluate_query(g, parse_query("SELECT * WHERE { ?s ?p ?o } LIMIT 0")).bindings == []
    assert len(evaluate_query(g, parse_query("SELECT * WHERE { ?s ?p ?o } OFFSET 1")).bindings) == 2
    assert len(evaluate_query(g, parse_query("SELECT * WHERE { ?s ?p ?o } LIMIT 5 OFFSET 2")).bindings) == 1


def test_count_and_ask():
    g = parse_turtle("@prefix : <http://example.org/> . :a :p 1 . :b :p 2 . :c :q 3 .")
    res = evaluate_query(g, parse_query("PREFIX : <http://example.org/> SELECT (COUNT(*) AS ?n) WHERE { ?s :p ?o }"))
    assert res.bindings == [{"n": Literal("2", XSD_INTEGER)}]
    assert evaluate_query(g, parse_query("ASK { ?s <http://example.org/q> ?o }")) is True
    assert evaluate_query(g, parse_query("ASK { ?s <http://example.org/r> ?o }")) is False


def test_values_and_union():
    g = parse_turtle("@prefix : <http://example.org/> . :a :p 1 . :b :p 2 . :c :q 3 .")
    q = parse_query("PREFIX : <http://example.org/> SELECT ?s WHERE { VALUES ?s { :a :c } "
                    "{ ?s :p ?o } UNION { ?s :q ?o } }")
    assert {b["s"].value for b in evaluate_query(g, q).bindings} == {EX + "a", EX + "c"}


@pytest.mark.parametrize("text, kind", [
    ("SELECT * WHERE { ?s ?p ?o OPTIONAL { ?s ?q ?r } }", UnsupportedFeature),
    ("SELECT * WHERE { ?s ?p ?o MINUS { ?s ?q ?r } }", UnsupportedFeature),
    ("SELECT * WHERE { ?s ex:p ?o }", UndefinedPrefix),
    ("SELECT * WHERE { ?s ?p ?o ", UnbalancedBraces),
    ("SELECT * WHERE { SERVICE { ?s ?p ?o } }", MalformedService),
    ("SELECT * WHERE { SERVICE <http://x/sparql> ?s ?p ?o }", MalformedService),
    ("SELECT * WHERE { ?s ?p }", ParseError),
])
def test_rejections(text, kind):
    with pytest.raises(kind) as info:
        parse_query(text)
    doc = info.value.to_json()
    assert doc["position"]["line"] >= 1


def test_unsupported_feature_is_named():
    with pytest.raises(UnsupportedFeature) as info:
        parse_query("SELECT * WHERE { ?s ?p ?o OPTIONAL { ?s ?q ?r } }")
    assert "OPTIONAL" in str(info.value)


def test_unwrap_single_service():
    q = parse_query("SELECT ?s WHERE { SERVICE <http://e/sparql> { ?s a <http://x/C> } }")
    endpoint, bare = unwrap_single_service(q)
    assert endpoint == "http://e/sparql" and count_services(bare) == 0
    assert triple_patterns(bare.pattern) == triple_patterns(q.pattern)


def test_trivial_federation_shape():
    tps = [TriplePattern(Variable("s"), IRI(EX + "p"), Variable("o")),
           TriplePattern(Variable("o"), IRI(EX + "q"), Variable("z"))]
    fed = build_trivial_federation(tps, ["http://e1/", "http://e2/", "http://e3/"])
    assert isinstance(fed, Join) and all(isinstance(c, Union) and len(c.branches) == 3 for c in fed.children)
    report = classify_splits(Query("SELECT", fed))
    assert report.disjunctive and report.conjunctive
    assert count_services(fed) == 6


def test_certain_variables_through_union():
    q = parse_query("SELECT * WHERE { { ?a ?b ?c } UNION { ?a ?d ?e } ?a ?f ?g }")
    assert certain_variables(q.pattern) == {"a", "f", "g"}


# --- expressions ---------------------------------------------------------------------

ONE = Literal("1", XSD_INTEGER)
TWO = Literal("2", XSD_INTEGER)


def test_numeric_comparison():
    assert filter_passes(BinOp("<", ONE, TWO), {})
    assert not filter_passes(BinOp("=", ONE, TWO), {})


def test_unbound_variable_is_error_and_drops_row():
    with pytest.raises(ExprError):
        evaluate(BinOp("=", Variable("x"), ONE), {})
    assert not filter_passes(BinOp("=", Variable("x"), ONE), {})


def test_logical_error_absorption():
    err = BinOp("=", Variable("x"), ONE)
    true = BinOp("=", ONE, ONE)
    false = BinOp("=", ONE, TWO)
    assert filter_passes(BinOp("||", err, true), {})
    assert not filter_passes(BinOp("||", err, false), {})
    assert not filter_passes(BinOp("&&", err, true), {})
    assert not filter_passes(BinOp("&&", err, false), {})
    assert not filter_passes(Not(err), {})


def test_builtins():
    row = {"x": Literal("Hello World", lang="en")}
    assert filter_passes(Call("REGEX", (Variable("x"), Literal("^hello"), Literal("i"))), row)
    assert filter_passes(Call("CONTAINS", (Variable("x"), Literal("World"))), row)
    assert filter_passes(Call("BOUND", (Variable("x"),)), row)
    assert not filter_passes(Call("BOUND", (Variable("y"),)), row)
    assert filter_passes(Call("LANG", (Variable("x"),)), row)


def test_filter_in_query():
    g = parse_turtle("@prefix : <http://example.org/> . :a :p 1 . :b :p 5 . :c :p \"x\" .")
    q = parse_query("PREFIX : <http://example.org/> SELECT ?s WHERE { ?s :p ?o FILTER(?o > 2) }")
    assert [b["s"].value for b in evaluate_query(g, q).bindings] == [EX + "b"]


# --- round trip property ---------------------------------------------------------

VARS = [Variable(n) for n in ("a", "b", "c", "d")]
IRIS = [IRI(EX + n) for n in ("p", "q", "r")]
LITS = [Literal("x"), Literal("y", lang="en"), ONE]

subj = st.sampled_from(VARS + IRIS)
obj = st.sampled_from(VARS + IRIS + LITS)
triple = st.builds(TriplePattern, subj, st.sampled_from(VARS[:1] + IRIS), obj)
bgp = st.lists(triple, min_size=1, max_size=3).map(lambda ts: BGP(tuple(ts)))

leaf_expr = st.sampled_from(VARS + LITS + IRIS[:1])
exprs = st.recursive(
    leaf_expr,
    lambda inner: st.one_of(
        st.builds(BinOp, st.sampled_from(["=", "!=", "<", ">=", "&&", "||"]), inner, inner),
        st.builds(Not, inner),
        st.builds(lambda v: Call("BOUND", (v,)), st.sampled_from(VARS)),
    ),
    max_leaves=4,
)
values = st.builds(
    lambda n, rows: Values(tuple(v.name for v in VARS[:n]), tuple(tuple(r[:n]) for r in rows)),
    st.integers(1, 2), st.lists(st.lists(st.sampled_from(IRIS + LITS + [None]), min_size=2, max_size=2), max_size=3),
)


def _join(children):
    # adjacent BGPs would merge when re-parsed
    out = []
    for c in children:
        if out and isinstance(out[-1], BGP) and isinstance(c, BGP):
            out[-1] = BGP(out[-1].patterns + c.patterns)
        else:
            out.append(c)
    return out[0] if len(out) == 1 else Join(tuple(out))


def patterns(depth):
    if depth == 0:
        return st.one_of(bgp, values)
    inner = patterns(depth - 1)
    return st.one_of(
        bgp,
        st.builds(lambda e, p, s: Service(e, p, s), st.sampled_from([IRI("http://e1/sparql"), IRI("http://e2/sparql")]),
                  inner, st.booleans()),
        st.lists(inner, min_size=2, max_size=3).map(lambda bs: Union(tuple(bs))),
        st.lists(inner, min_size=2, max_size=3).map(_join),
        st.builds(Filter, inner, exprs),
    )


queries = st.builds(
    lambda p, d, lim, off: Query("SELECT", p, None, d, (), lim, off),
    patterns(4), st.booleans(), st.none() | st.integers(0, 50), st.none() | st.integers(0, 5),
)


@given(queries)
def test_parse_serialize_round_trip(q):
    assert parse_query(serialize_query(q)) == q


@given(queries)
def test_serialization_is_a_fixed_point(q):
    text = serialize_query(q)
    assert serialize_query(parse_query(text)) == text


@given(patterns(3))
def test_count_services_matches_text(p):
    q = Query("SELECT", p)
    assert count_services(parse_query(serialize_query(q))) == serialize_query(q).count("SERVICE")
