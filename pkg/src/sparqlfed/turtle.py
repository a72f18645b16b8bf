"""Turtle reader/writer and N-Triples writer."""

from __future__ import annotations

import hashlib
import re
from collections import defaultdict
from pathlib import Path

from .graph import Graph, Triple
from .lexer import TokenStream, UndefinedPrefix, unescape_iri, unescape_local, unescape_string
from .terms import (
    IRI, RDF_FIRST, RDF_NIL, RDF_REST, RDF_TYPE, XSD_BOOLEAN, XSD_DECIMAL, XSD_DOUBLE,
    XSD_INTEGER, XSD_STRING, BNode, Literal, TermError, escape_string, term_key,
)

_LOCAL_SAFE = re.compile(r"^[A-Za-z0-9_](?:[A-Za-z0-9_\-.]*[A-Za-z0-9_\-])?$")


def _resolve(base: str | None, ref: str) -> str:
    if base is None or re.match(r"^[A-Za-z][A-Za-z0-9+.\-]*:", ref):
        return ref
    from urllib.parse import urljoin
    return urljoin(base, ref)


class _TurtleParser(TokenStream):
    def __init__(self, text: str, bnode_scope: str, base: str | None):
        super().__init__(text)
        self.prefixes: dict[str, str] = {}
        self.base = base
        self.scope = bnode_scope
        self.fresh = 0
        self.graph = Graph()

    def new_bnode(self) -> BNode:
        self.fresh += 1
        return BNode(f"{self.scope}g{self.fresh}")

    def parse(self) -> Graph:
        while self.tok.kind != "EOF":
            self.statement()
        return self.graph

    def statement(self):
        tok = self.tok
        if tok.kind == "LANGTAG" and tok.text in ("@prefix", "@base"):
            self.advance()
            self.directive(tok.text[1:].upper())
            self.expect(".")
            return
        if self.at_keyword("PREFIX", "BASE") and self.peek().kind in ("PNAME", "IRIREF"):
            self.directive(self.advance().text.upper())
            return
        self.triples()
        self.expect(".")

    def directive(self, name):
        if name == "PREFIX":
            tok = self.advance()
            if tok.kind != "PNAME" or not tok.text.endswith(":"):
                raise self.fail("expected a prefix name", tok)
            iri = self.advance()
            if iri.kind != "IRIREF":
                raise self.fail("expected an IRI", iri)
            self.prefixes[tok.text[:-1]] = _resolve(self.base, unescape_iri(iri.text[1:-1]))
        else:
            iri = self.advance()
            if iri.kind != "IRIREF":
                raise self.fail("expected an IRI", iri)
            self.base = _resolve(self.base, unescape_iri(iri.text[1:-1]))

    def triples(self):
        if self.at("["):
            subject = self.blank_property_list()
            if self.at("."):
                return
        else:
            subject = self.subject()
        self.predicate_object_list(subject)

    def subject(self):
        tok = self.tok
        if tok.kind in ("IRIREF", "PNAME"):
            return self.iri()
        if tok.kind == "BNODE":
            self.advance()
            return BNode(self.scope + tok.text[2:])
        if self.at("("):
            return self.collection()
        raise self.fail("expected a subject")

    def predicate_object_list(self, subject):
        while True:
            if self.at("a") and self.tok.kind == "NAME" and self.tok.text == "a":
                self.advance()
                pred = IRI(RDF_TYPE)
            else:
                pred = self.iri()
            while True:
                obj = self.object()
                try:
                    self.graph.add(subject, pred, obj)
                except TermError as exc:
                    raise self.fail(str(exc)) from None
                if not self.accept(","):
                    break
            if not self.accept(";"):
                return
            while self.accept(";"):
                pass
            if self.at(".", "]") or self.tok.kind == "EOF":
                return

    def blank_property_list(self):
        self.expect("[")
        node = self.new_bnode()
        if not self.at("]"):
            self.predicate_object_list(node)
        self.expect("]")
        return node

    def collection(self):
        self.expect("(")
        items = []
        while not self.at(")"):
            if self.tok.kind == "EOF":
                raise self.fail("unterminated collection")
            items.append(self.object())
        self.advance()
        if not items:
            return IRI(RDF_NIL)
        head = self.new_bnode()
        node = head
        for k, item in enumerate(items):
            self.graph.add(node, IRI(RDF_FIRST), item)
            nxt = self.new_bnode() if k + 1 < len(items) else IRI(RDF_NIL)
            self.graph.add(node, IRI(RDF_REST), nxt)
            node = nxt
        return head

    def iri(self) -> IRI:
        tok = self.advance()
        try:
            if tok.kind == "IRIREF":
                return IRI(_resolve(self.base, unescape_iri(tok.text[1:-1])))
            if tok.kind == "PNAME":
                prefix, _, local = tok.text.partition(":")
                if prefix not in self.prefixes:
                    raise self.fail(f"undefined prefix {prefix + ':'!r}", tok, cls=UndefinedPrefix)
                return IRI(self.prefixes[prefix] + unescape_local(local))
        except TermError as exc:
            raise self.fail(str(exc), tok) from None
        raise self.fail("expected an IRI", tok)

    def object(self):
        tok = self.tok
        if tok.kind in ("IRIREF", "PNAME"):
            return self.iri()
        if tok.kind == "BNODE":
            self.advance()
            return BNode(self.scope + tok.text[2:])
        if self.at("["):
            return self.blank_property_list()
        if self.at("("):
            return self.collection()
        return self.literal()

    def literal(self) -> Literal:
        tok = self.tok
        sign = ""
        if self.at("+", "-") and self.peek().kind == "NUMBER":
            sign = "-" if self.advance().text == "-" else ""
            tok = self.tok
        if tok.kind == "NUMBER":
            self.advance()
            text = sign + tok.text
            if "e" in text.lower():
                return Literal(text, XSD_DOUBLE)
            if "." in text:
                return Literal(text, XSD_DECIMAL)
            return Literal(text, XSD_INTEGER)
        if tok.kind == "NAME" and tok.text in ("true", "false"):
            self.advance()
            return Literal(tok.text, XSD_BOOLEAN)
        if tok.kind == "STRING":
            self.advance()
            try:
                lexical = unescape_string(tok.text)
            except ValueError as exc:
                raise self.fail(str(exc), tok) from None
            if self.tok.kind == "LANGTAG":
                return Literal(lexical, lang=self.advance().text[1:])
            if self.accept("^^"):
                return Literal(lexical, self.iri().value)
            return Literal(lexical, XSD_STRING)
        raise self.fail("expected an object")


def parse_turtle(text: str, bnode_scope: str | None = None, base: str | None = None) -> Graph:
    """Parse a Turtle document.

    Blank node labels are scoped to the document: each label gets the
    `bnode_scope` prefix (default: a digest of the text), so two documents
    never share blank nodes by accident.
    """
    if bnode_scope is None:
        bnode_scope = "b" + hashlib.sha1(text.encode("utf-8")).hexdigest()[:8] + "_"
    return _TurtleParser(text, bnode_scope, base).parse()


def skolemize(graph: Graph, file_id: str) -> Graph:
    """Replace blank nodes with IRIs derived from the file id and the local label."""
    def sk(term):
        if isinstance(term, BNode):
            return IRI(f"urn:skolem:{file_id}:{term.label}")
        return term
    return Graph(Triple(sk(s), p, sk(o)) for s, p, o in graph)


def load_graph(path: str | Path, skolem: bool = True) -> Graph:
    """Read a Turtle or N-Triples file; blank nodes are skolemized by default."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    file_id = re.sub(r"[^A-Za-z0-9_\-]", "_", path.stem)
    graph = parse_turtle(text, bnode_scope="")
    return skolemize(graph, file_id) if skolem else graph


# --- writers ------------------------------------------------------------------

def _term_nt(term) -> str:
    if isinstance(term, IRI):
        return "<" + term.value.replace("\\", "\\u005C").replace(">", "\\u003E") + ">"
    return str(term)


def _term_ttl(term, prefixes: dict[str, str]) -> str:
    if isinstance(term, IRI):
        for name, ns in prefixes.items():
            if term.value.startswith(ns):
                local = term.value[len(ns):]
                if local == "" or _LOCAL_SAFE.match(local):
                    return f"{name}:{local}"
        return _term_nt(term)
    if isinstance(term, Literal) and prefixes and not term.lang and term.datatype != XSD_STRING:
        return '"' + escape_string(term.lexical) + '"^^' + _term_ttl(IRI(term.datatype), prefixes)
    return str(term)


def serialize_turtle(graph: Graph, prefixes: dict[str, str] | None = None) -> str:
    """Deterministic Turtle: subjects sorted, predicates grouped with ';'."""
    prefixes = dict(prefixes or {})
    lines = [f"@prefix {name}: <{ns}> ." for name, ns in sorted(prefixes.items())]
    if lines:
        lines.append("")
    by_subject = defaultdict(lambda: defaultdict(list))
    for s, p, o in graph:
        by_subject[s][p].append(o)
    for s in sorted(by_subject, key=term_key):
        preds = by_subject[s]
        chunks = []
        for p in sorted(preds, key=term_key):
            pred = "a" if p.value == RDF_TYPE else _term_ttl(p, prefixes)
            objs = ", ".join(_term_ttl(o, prefixes) for o in sorted(preds[p], key=term_key))
            chunks.append(f"{pred} {objs}")
        lines.append(_term_ttl(s, prefixes) + " " + " ;\n    ".join(chunks) + " .")
    return "\n".join(lines) + ("\n" if lines else "")


def serialize_ntriples(graph: Graph) -> str:
    """One triple per line, sorted, canonical escaping."""
    rows = sorted(graph, key=lambda t: (term_key(t[0]), term_key(t[1]), term_key(t[2])))
    return "".join(f"{_term_nt(s)} {_term_nt(p)} {_term_nt(o)} .\n" for s, p, o in rows)


def isomorphic(a: Graph, b: Graph) -> bool:
    """Graph isomorphism up to blank node renaming (backtracking; fine for small graphs)."""
    if len(a) != len(b):
        return False
    a_blank = {t[i] for t in a for i in (0, 2) if isinstance(t[i], BNode)}
    b_blank = {t[i] for t in b for i in (0, 2) if isinstance(t[i], BNode)}
    if len(a_blank) != len(b_blank):
        return False
    ground_a = {t for t in a if not any(isinstance(x, BNode) for x in t)}
    ground_b = {t for t in b if not any(isinstance(x, BNode) for x in t)}
    if ground_a != ground_b:
        return False
    if not a_blank:
        return True

    def signature(graph, node):
        sig = []
        for s, p, o in graph:
            if s == node:
                sig.append(("s", p, None if isinstance(o, BNode) else o))
            if o == node:
                sig.append(("o", p, None if isinstance(s, BNode) else s))
        return tuple(sorted(sig, key=repr))

    sig_a = {n: signature(a, n) for n in a_blank}
    sig_b = {n: signature(b, n) for n in b_blank}
    order = sorted(a_blank, key=lambda n: sum(1 for m in b_blank if sig_b[m] == sig_a[n]))
    rest_a = [t for t in a if t not in ground_a]
    target = {t for t in b if t not in ground_b}

    def search(k, mapping, used):
        if k == len(order):
            def m(x):
                return mapping.get(x, x)
            return {(m(s), p, m(o)) for s, p, o in rest_a} == target
        n = order[k]
        for cand in b_blank:
            if cand in used or sig_b[cand] != sig_a[n]:
                continue
            mapping[n] = cand
            used.add(cand)
            if search(k + 1, mapping, used):
                return True
            del mapping[n]
            used.discard(cand)
        return False

    return search(0, {}, set())
