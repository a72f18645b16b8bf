"""VoID descriptions: graph encoding, retrieval from endpoints, and
computation through self-descriptive SPARQL queries."""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional
from urllib.parse import urlsplit

from .client import EndpointError, SparqlClient
from .graph import Graph
from .lexer import ParseError
from .solutions import SolutionSet
from .terms import IRI, RDF_TYPE, SD, VOID, XSD_INTEGER, BNode, Literal, namespace_of
from .turtle import parse_turtle

log = logging.getLogger(__name__)

_TYPE = IRI(RDF_TYPE)
_DATASET = IRI(VOID + "Dataset")
_LINKSET = IRI(VOID + "Linkset")
INCOMPLETE = IRI("urn:sparqlfed:incomplete")  # marker on partially computed descriptions
PREFIXES = {"void": VOID, "sd": SD, "rdf": "http://www.w3.org/1999/02/22-rdf-syntax-ns#",
            "xsd": "http://www.w3.org/2001/XMLSchema#"}


def _v(name: str) -> IRI:
    return IRI(VOID + name)


@dataclass(frozen=True)
class Linkset:
    predicate: str
    target: str  # endpoint URL of the other dataset
    triples: int


@dataclass
class VoidDescription:
    dataset: str
    triples: int = 0
    class_partitions: dict = field(default_factory=dict)  # class IRI -> entity count
    property_partitions: dict = field(default_factory=dict)  # property IRI -> triple count
    distinct_subjects: int = 0
    distinct_objects: int = 0
    endpoint: Optional[str] = None
    linksets: list = field(default_factory=list)
    complete: bool = True

    @property
    def classes(self) -> int:
        return len(self.class_partitions)

    @property
    def properties(self) -> int:
        return len(self.property_partitions)

    def check(self) -> list[str]:
        """Violated count invariants (empty when consistent)."""
        problems = []
        counts = [self.triples, self.distinct_subjects, self.distinct_objects,
                  *self.class_partitions.values(), *self.property_partitions.values()]
        if any(c < 0 for c in counts):
            problems.append("negative count")
        for p, n in self.property_partitions.items():
            if n > self.triples:
                problems.append(f"partition {p} exceeds total triples")
        if self.complete and self.property_partitions and sum(self.property_partitions.values()) != self.triples:
            problems.append("property partitions do not sum to the triple count")
        return problems

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset, "endpoint": self.endpoint, "triples": self.triples,
            "classes": self.classes, "properties": self.properties,
            "distinct_subjects": self.distinct_subjects, "distinct_objects": self.distinct_objects,
            "class_partitions": dict(sorted(self.class_partitions.items())),
            "property_partitions": dict(sorted(self.property_partitions.items())),
            "linksets": [vars(ls) for ls in self.linksets], "complete": self.complete,
        }

    def to_graph(self) -> Graph:
        g = Graph()
        ds = IRI(self.dataset)
        g.add(ds, _TYPE, _DATASET)
        if self.endpoint:
            g.add(ds, _v("sparqlEndpoint"), IRI(self.endpoint))
        for name, value in (("triples", self.triples), ("classes", self.classes),
                            ("properties", self.properties),
                            ("distinctSubjects", self.distinct_subjects),
                            ("distinctObjects", self.distinct_objects)):
            g.add(ds, _v(name), _int(value))
        for k, (c, n) in enumerate(sorted(self.class_partitions.items())):
            node = BNode(f"cp{k}")
            g.add(ds, _v("classPartition"), node)
            g.add(node, _v("class"), IRI(c))
            g.add(node, _v("entities"), _int(n))
        for k, (p, n) in enumerate(sorted(self.property_partitions.items())):
            node = BNode(f"pp{k}")
            g.add(ds, _v("propertyPartition"), node)
            g.add(node, _v("property"), IRI(p))
            g.add(node, _v("triples"), _int(n))
        for k, ls in enumerate(sorted(self.linksets, key=lambda x: (x.target, x.predicate))):
            node = BNode(f"ls{k}")
            g.add(node, _TYPE, _LINKSET)
            g.add(node, _v("subjectsTarget"), ds)
            g.add(node, _v("objectsTarget"), IRI(ls.target))
            g.add(node, _v("linkPredicate"), IRI(ls.predicate))
            g.add(node, _v("triples"), _int(ls.triples))
        if not self.complete:
            g.add(ds, INCOMPLETE, Literal("true", "http://www.w3.org/2001/XMLSchema#boolean"))
        return g

    @classmethod
    def from_graph(cls, g: Graph, endpoint: str | None = None) -> "VoidDescription | None":
        """Read the dataset node best matching `endpoint`; None when no void:Dataset exists."""
        datasets = sorted(g.instances_of(_DATASET), key=lambda t: str(t))
        if not datasets:
            return None

        def score(node):
            eps = {o.value for o in g.objects_of(node, _v("sparqlEndpoint")) if isinstance(o, IRI)}
            return (endpoint in eps if endpoint else False, len(list(g.triples(s=node))))

        ds = max(datasets, key=score)
        eps = sorted(o.value for o in g.objects_of(ds, _v("sparqlEndpoint")) if isinstance(o, IRI))
        endpoint = endpoint if endpoint in eps or not eps else eps[0]
        name = ds.value if isinstance(ds, IRI) else dataset_iri(endpoint or "urn:sparqlfed:local")
        desc = cls(dataset=name, endpoint=endpoint)
        desc.triples = _read_int(g, ds, "triples")
        desc.distinct_subjects = _read_int(g, ds, "distinctSubjects")
        desc.distinct_objects = _read_int(g, ds, "distinctObjects")
        for part in g.objects_of(ds, _v("classPartition")):
            for c in g.objects_of(part, _v("class")):
                desc.class_partitions[c.value] = _read_int(g, part, "entities")
        for part in g.objects_of(ds, _v("propertyPartition")):
            for p in g.objects_of(part, _v("property")):
                desc.property_partitions[p.value] = _read_int(g, part, "triples")
        for node in g.instances_of(_LINKSET):
            if ds not in set(g.objects_of(node, _v("subjectsTarget"))):
                continue
            targets = list(g.objects_of(node, _v("objectsTarget")))
            preds = list(g.objects_of(node, _v("linkPredicate")))
            if targets and preds:
                desc.linksets.append(Linkset(preds[0].value, targets[0].value,
                                             _read_int(g, node, "triples")))
        desc.linksets.sort(key=lambda x: (x.target, x.predicate))
        desc.complete = not any(True for _ in g.triples(ds, INCOMPLETE, None))
        return desc


def _int(n: int) -> Literal:
    return Literal(str(int(n)), XSD_INTEGER)


def _read_int(g: Graph, node, name: str) -> int:
    for o in g.objects_of(node, _v(name)):
        if isinstance(o, Literal):
            try:
                return int(o.lexical)
            except ValueError:
                pass
    return 0


def dataset_iri(endpoint: str) -> str:
    return endpoint + "#dataset"


def void_from_graph(graph: Graph, endpoint: str | None = None, dataset: str | None = None) -> VoidDescription:
    """Description of an in-memory graph, counted directly."""
    return _assemble(graph, endpoint, dataset)


def _assemble(triples: Iterable, endpoint, dataset) -> VoidDescription:
    subjects, objects = set(), set()
    props: Counter = Counter()
    members = defaultdict(set)
    total = 0
    for s, p, o in triples:
        total += 1
        subjects.add(s)
        objects.add(o)
        props[p.value] += 1
        if p == _TYPE and isinstance(o, IRI):
            members[o.value].add(s)
    return VoidDescription(
        dataset=dataset or dataset_iri(endpoint or "urn:sparqlfed:local"),
        triples=total,
        class_partitions={c: len(m) for c, m in members.items()},
        property_partitions=dict(props),
        distinct_subjects=len(subjects),
        distinct_objects=len(objects),
        endpoint=endpoint,
    )


# --- retrieval ------------------------------------------------------------------

_VOID_TRIPLES = f"""SELECT DISTINCT ?s ?p ?o WHERE {{
  {{ ?s a <{VOID}Dataset> . ?s ?p ?o }}
  UNION {{ ?d a <{VOID}Dataset> . ?d ?lp ?s . ?s ?p ?o }}
  UNION {{ ?s a <{VOID}Linkset> . ?s ?p ?o }}
}}"""

_VOID_TRIPLES_NAMED = f"""SELECT DISTINCT ?s ?p ?o WHERE {{ GRAPH ?g {{
  {{ ?s a <{VOID}Dataset> . ?s ?p ?o }}
  UNION {{ ?d a <{VOID}Dataset> . ?d ?lp ?s . ?s ?p ?o }}
  UNION {{ ?s a <{VOID}Linkset> . ?s ?p ?o }}
}} }}"""


def well_known_url(endpoint: str) -> str:
    parts = urlsplit(endpoint)
    return f"{parts.scheme}://{parts.netloc}/.well-known/void"


def _graph_from_rows(res) -> Graph:
    g = Graph()
    if isinstance(res, SolutionSet):
        for row in res.bindings:
            s, p, o = row.get("s"), row.get("p"), row.get("o")
            if isinstance(s, (IRI, BNode)) and isinstance(p, IRI) and o is not None:
                g.add(s, p, o)
    return g


def retrieve_void(client: SparqlClient, endpoint: str, timeout: float | None = None):
    """Published VoID for `endpoint` as (description, stage) or None.

    Stages, first success wins: the well-known URL, the default graph,
    named graphs, and the service description's sd:defaultDataset.
    """

    def well_known():
        text = client.get_text(well_known_url(endpoint), timeout=timeout)
        return parse_turtle(text) if text else None

    def default_graph():
        return _graph_from_rows(client.execute(endpoint, _VOID_TRIPLES, timeout))

    def named_graphs():
        return _graph_from_rows(client.execute(endpoint, _VOID_TRIPLES_NAMED, timeout))

    def service_description():
        text = client.get_text(endpoint, timeout=timeout)
        if not text:
            return None
        sd = parse_turtle(text)
        out = Graph()
        for _, _, node in sd.triples(p=IRI(SD + "defaultDataset")):
            if not any(True for _ in sd.triples(node, _TYPE, _DATASET)) and isinstance(node, IRI) \
                    and node.value.startswith(("http://", "https://")):
                linked = client.get_text(node.value, timeout=timeout)
                if linked:
                    out.update(parse_turtle(linked))
        out.update(sd)
        return out

    stages = (("well-known", well_known), ("default-graph", default_graph),
              ("named-graph", named_graphs), ("service-description", service_description))
    for name, stage in stages:
        try:
            g = stage()
        except EndpointError as exc:
            if exc.kind == "unavailable":
                raise
            log.debug("VoID stage %s failed for %s: %s", name, endpoint, exc)
            continue
        except (ParseError, ValueError) as exc:
            log.debug("VoID stage %s returned unreadable data for %s: %s", name, endpoint, exc)
            continue
        if g:
            desc = VoidDescription.from_graph(g, endpoint)
            if desc is not None:
                return desc, name
    return None


# --- computation ----------------------------------------------------------------

Q_TOTAL = "SELECT (COUNT(*) AS ?n) WHERE { ?s ?p ?o }"
Q_CLASSES = "SELECT ?c (COUNT(DISTINCT ?s) AS ?n) WHERE { ?s a ?c } GROUP BY ?c"
Q_PROPERTIES = "SELECT ?p (COUNT(*) AS ?n) WHERE { ?s ?p ?o } GROUP BY ?p"
Q_SUBJECTS = "SELECT (COUNT(DISTINCT ?s) AS ?n) WHERE { ?s ?p ?o }"
Q_OBJECTS = "SELECT (COUNT(DISTINCT ?o) AS ?n) WHERE { ?s ?p ?o }"


class _NeedScan(Exception):
    pass


def _count(res, key="n") -> int:
    if not isinstance(res, SolutionSet) or len(res.bindings) != 1:
        raise _NeedScan()
    return int(res.bindings[0][key].lexical)


def _grouped(res, key) -> dict:
    if not isinstance(res, SolutionSet) or res.truncated:
        raise _NeedScan()
    return {row[key].value: int(row["n"].lexical) for row in res.bindings
            if isinstance(row.get(key), IRI)}


def scan_triples(client: SparqlClient, endpoint: str, page: int = 10_000,
                 timeout: float | None = None) -> list[tuple]:
    """All triples through LIMIT/OFFSET paging; the page shrinks to any server cap."""
    out = []
    offset = 0
    while True:
        res = client.execute(endpoint, f"SELECT ?s ?p ?o WHERE {{ ?s ?p ?o }} LIMIT {page} OFFSET {offset}",
                             timeout)
        rows = res.bindings
        if res.truncated and len(rows) < page:
            if not rows:
                raise EndpointError("malformed-results", "endpoint returns no rows while truncating", endpoint)
            page = len(rows)
        out.extend((r["s"], r["p"], r["o"]) for r in rows)
        offset += len(rows)
        if len(rows) < page:
            return out


def compute_void(client: SparqlClient, endpoint: str, aggregates: bool = True,
                 page: int = 10_000, timeout: float | None = None) -> VoidDescription:
    """Recreate the description from aggregate queries, or by scanning when
    the endpoint refuses aggregates or truncates grouped results."""
    if aggregates:
        desc = VoidDescription(dataset=dataset_iri(endpoint), endpoint=endpoint)
        try:
            for attr, query, reader in (
                ("triples", Q_TOTAL, _count),
                ("class_partitions", Q_CLASSES, lambda r: _grouped(r, "c")),
                ("property_partitions", Q_PROPERTIES, lambda r: _grouped(r, "p")),
                ("distinct_subjects", Q_SUBJECTS, _count),
                ("distinct_objects", Q_OBJECTS, _count),
            ):
                try:
                    setattr(desc, attr, reader(client.execute(endpoint, query, timeout)))
                except EndpointError as exc:
                    if exc.kind == "feature-unsupported":
                        raise _NeedScan() from None
                    if exc.kind != "http-status":
                        raise
                    log.warning("VoID query for %s failed: %s", endpoint, exc)
                    desc.complete = False
            return desc
        except _NeedScan:
            log.info("falling back to paged scanning for %s", endpoint)
    return _assemble(scan_triples(client, endpoint, page, timeout), endpoint, None)


# --- linksets -------------------------------------------------------------------

def typed_subjects(client: SparqlClient, endpoint: str, timeout: float | None = None) -> set:
    res = client.execute(endpoint, "SELECT DISTINCT ?s WHERE { ?s a ?c }", timeout)
    return {row["s"] for row in res.bindings if isinstance(row.get("s"), IRI)}


def compute_linksets(client: SparqlClient, endpoint: str, others: Iterable[str], exact: bool = False,
                     timeout: float | None = None) -> list[Linkset]:
    """Per-predicate counts of triples whose IRI objects point into another endpoint.

    The default approximation matches object namespaces against the
    namespaces of the other endpoint's typed subjects; `exact` matches the
    objects themselves.
    """
    res = client.execute(endpoint, "SELECT ?p ?o WHERE { ?s ?p ?o FILTER(isIRI(?o)) }", timeout)
    links = [(row["p"], row["o"]) for row in res.bindings
             if isinstance(row.get("o"), IRI) and row["p"].value != RDF_TYPE]
    out = []
    for other in others:
        if other == endpoint:
            continue
        members = typed_subjects(client, other, timeout)
        if exact:
            hit = lambda o: o in members  # noqa: E731
        else:
            spaces = {namespace_of(m.value) for m in members}
            hit = lambda o: namespace_of(o.value) in spaces  # noqa: E731
        per_pred = Counter(p.value for p, o in links if hit(o))
        out.extend(Linkset(p, other, n) for p, n in sorted(per_pred.items()))
    return out
