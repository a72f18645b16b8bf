import pytest
from hypothesis import given, strategies as st

from sparqlfed.graph import Graph, Triple, TriplePattern, eval_bgp, infer_type_closure
from sparqlfed.lexer import ParseError, UndefinedPrefix
from sparqlfed.solutions import join
from sparqlfed.terms import IRI, RDF_LANGSTRING, RDFS_DOMAIN, RDFS_RANGE, BNode, Literal, Variable
from sparqlfed.turtle import isomorphic, load_graph, parse_turtle, serialize_ntriples, serialize_turtle

from helpers import CAPTURED_BGP, DISPOSITION, SHIP, TYPE, as_set

EX = "http://example.org/"

SMALL = """@prefix : <http://example.org/> .
@prefix xsd: <http://www.w3.org/2001/XMLSchema#> .
:alice a :Person ; :name "Alice"@en ; :age 31 ; :knows :bob , :carol .
:bob a :Person ; :name "Bob" ; :age "27"^^xsd:integer .
:carol a :Person ; :knows [ :name "anon" ] .
"""


def test_empty_document():
    assert len(parse_turtle("")) == 0


def test_single_triple():
    g = parse_turtle("<http://a/s> <http://a/p> <http://a/o> .")
    assert len(g) == 1


def test_small_fixture_counts():
    g = parse_turtle(SMALL)
    assert len(g) == 11
    counts = {p.value.rsplit("/", 1)[-1]: g.count(p=p) for p in g.predicates()}
    assert counts == {"22-rdf-syntax-ns#type": 3, "name": 3, "age": 2, "knows": 3}


def test_turtle_round_trip_isomorphic():
    g = parse_turtle(SMALL)
    assert isomorphic(parse_turtle(serialize_turtle(g)), g)
    assert isomorphic(parse_turtle(serialize_ntriples(g)), g)


def test_language_literal_survives():
    g = parse_turtle('<http://a/s> <http://a/p> "chat"@fr .')
    (t,) = list(parse_turtle(serialize_turtle(g)))
    assert t.object == Literal("chat", RDF_LANGSTRING, "fr")


def test_empty_graph_serializes_to_parseable_text():
    assert len(parse_turtle(serialize_turtle(Graph()))) == 0


def test_syntax_error_has_position():
    with pytest.raises(ParseError) as info:
        parse_turtle("<http://a/s> <http://a/p> .")
    assert info.value.line == 1 and info.value.column is not None


def test_undefined_prefix():
    with pytest.raises(UndefinedPrefix):
        parse_turtle("ex:s ex:p ex:o .")


def test_duplicate_triple_set_semantics():
    g = Graph()
    assert g.add(IRI(EX + "s"), IRI(EX + "p"), Literal("x"))
    assert not g.add(IRI(EX + "s"), IRI(EX + "p"), Literal("x"))
    assert len(g) == 1


def test_indexes_follow_mutations():
    g = parse_turtle(SMALL)
    alice = IRI(EX + "alice")
    assert IRI(EX + "Person") in g.classes_of(alice)
    g.discard(alice, TYPE, IRI(EX + "Person"))
    assert not g.classes_of(alice)
    assert alice not in g.instances_of(IRI(EX + "Person"))
    assert g.count(p=TYPE) == 2


def test_skolemized_blank_nodes_are_stable(tmp_path):
    path = tmp_path / "data.ttl"
    path.write_text(SMALL)
    a, b = load_graph(path), load_graph(path)
    assert a == b
    assert not any(isinstance(x, BNode) for t in a for x in t)


def test_eval_empty_bgp_is_one_empty_binding():
    assert eval_bgp(parse_turtle(SMALL), []) == [{}]


def test_eval_three_ships():
    g = Graph()
    for i in range(3):
        g.add(IRI(f"{EX}s{i}"), TYPE, SHIP)
    g.add(IRI(EX + "x"), TYPE, IRI(EX + "boat"))
    assert len(eval_bgp(g, [TriplePattern(Variable("s"), TYPE, SHIP)])) == 3


def test_eval_captured_ships():
    g = Graph()
    for i, d in enumerate(["Captured", "Sunk", "Captured", "Scrapped"]):
        g.add(IRI(f"{EX}s{i}"), TYPE, SHIP)
        g.add(IRI(f"{EX}s{i}"), DISPOSITION, Literal(d))
    rows = eval_bgp(g, CAPTURED_BGP)
    assert {r["s"] for r in rows} == {IRI(EX + "s0"), IRI(EX + "s2")}


def test_query_blank_nodes_act_as_hidden_variables():
    g = parse_turtle(SMALL)
    rows = eval_bgp(g, [TriplePattern(Variable("x"), IRI(EX + "knows"), BNode("k")),
                        TriplePattern(BNode("k"), IRI(EX + "name"), Variable("n"))])
    assert {r["n"] for r in rows} == {Literal("Bob"), Literal("anon")}
    assert all(set(r) == {"x", "n"} for r in rows)


def test_closure_domain():
    g = Graph([Triple(IRI(EX + "s1"), IRI(EX + "p"), IRI(EX + "o1"))])
    onto = Graph([Triple(IRI(EX + "p"), IRI(RDFS_DOMAIN), IRI(EX + "c1"))])
    out = infer_type_closure(g, onto)
    assert Triple(IRI(EX + "s1"), TYPE, IRI(EX + "c1")) in out
    assert len(out) == 2


def test_closure_without_axioms_is_identity():
    g = parse_turtle(SMALL)
    assert infer_type_closure(g) == g


def test_closure_domain_and_range_chain():
    g = parse_turtle("@prefix : <http://example.org/> . :a :next :b . :b :next :c . :c :label \"c\" .")
    onto = Graph([Triple(IRI(EX + "next"), IRI(RDFS_DOMAIN), IRI(EX + "Node")),
                  Triple(IRI(EX + "next"), IRI(RDFS_RANGE), IRI(EX + "Node"))])
    out = infer_type_closure(g, onto)
    typed = {s.value.rsplit("/", 1)[-1] for s, _, _ in out.triples(p=TYPE)}
    assert typed == {"a", "b", "c"}
    assert infer_type_closure(out, onto) == out


# --- properties -------------------------------------------------------------------

NODES = [IRI(f"{EX}n{i}") for i in range(5)]
PREDS = [IRI(f"{EX}p{i}") for i in range(3)]
LITS = [Literal("a"), Literal("b", lang="en"), Literal("1", "http://www.w3.org/2001/XMLSchema#integer"),
        Literal('quote " and \\ back\nslash')]

triples = st.builds(Triple, st.sampled_from(NODES + [BNode("b0"), BNode("b1")]), st.sampled_from(PREDS),
                    st.sampled_from(NODES + LITS + [BNode("b0")]))
graphs = st.lists(triples, max_size=25).map(Graph)
VARS = [Variable(v) for v in "xyz"]
patterns = st.builds(TriplePattern, st.sampled_from(NODES[:3] + VARS), st.sampled_from(PREDS + VARS[:1]),
                     st.sampled_from(NODES[:3] + LITS[:2] + VARS))
bgps = st.lists(patterns, min_size=1, max_size=3)


def brute_force(g: Graph, bgp) -> set:
    """All assignments of graph terms to the BGP's variables that land inside g."""
    import itertools
    names = sorted({x.name for tp in bgp for x in tp if isinstance(x, Variable)})
    terms = {x for t in g for x in t}
    out = set()
    for values in itertools.product(terms, repeat=len(names)):
        mu = dict(zip(names, values))
        if all(tuple(mu[x.name] if isinstance(x, Variable) else x for x in tp) in g for tp in bgp):
            out.add(frozenset(mu.items()))
    return out


@given(graphs)
def test_turtle_round_trip_property(g):
    assert isomorphic(parse_turtle(serialize_turtle(g)), g)


@given(st.lists(triples.filter(lambda t: not isinstance(t.subject, BNode) and not isinstance(t.object, BNode)),
                max_size=12).map(Graph), st.lists(patterns, min_size=1, max_size=2))
def test_eval_bgp_matches_brute_force(g, bgp):
    assert as_set(eval_bgp(g, bgp)) == brute_force(g, bgp)


@given(graphs, bgps, bgps)
def test_join_correctness(g, p1, p2):
    assert as_set(eval_bgp(g, p1 + p2)) == as_set(join(eval_bgp(g, p1), eval_bgp(g, p2)))


@given(graphs, graphs, bgps)
def test_monotonicity(g1, extra, bgp):
    bigger = g1.copy()
    bigger.update(extra)
    assert as_set(eval_bgp(g1, bgp)) <= as_set(eval_bgp(bigger, bgp))
