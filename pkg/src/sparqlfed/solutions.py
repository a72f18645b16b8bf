"""Solution sequences and the W3C SPARQL JSON results format."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .terms import IRI, RDF_LANGSTRING, XSD_STRING, BNode, Literal, term_key


@dataclass
class SolutionSet:
    """A multiset of bindings plus the declared variable order."""

    variables: list[str]
    bindings: list[dict] = field(default_factory=list)
    truncated: bool = False

    def __len__(self):
        return len(self.bindings)

    def __iter__(self):
        return iter(self.bindings)

    def rows(self, variables: Sequence[str] | None = None) -> list[tuple]:
        vs = self.variables if variables is None else variables
        return [tuple(b.get(v) for v in vs) for b in self.bindings]

    def as_set(self, variables: Sequence[str] | None = None) -> frozenset:
        """Set semantics view after projection, the basis of oracle comparisons."""
        return frozenset(self.rows(variables))

    def sorted_rows(self, variables: Sequence[str] | None = None) -> list[tuple]:
        return sorted(self.rows(variables), key=lambda r: [term_key(t) for t in r])

    def to_json(self) -> dict:
        declared = set(self.variables)
        return {
            "head": {"vars": list(self.variables)},
            "results": {"bindings": [
                {k: term_to_json(v) for k, v in b.items() if v is not None and k in declared}
                for b in self.bindings
            ]},
        }


def term_to_json(term) -> dict:
    if isinstance(term, IRI):
        return {"type": "uri", "value": term.value}
    if isinstance(term, BNode):
        return {"type": "bnode", "value": term.label}
    if isinstance(term, Literal):
        out = {"type": "literal", "value": term.lexical}
        if term.lang:
            out["xml:lang"] = term.lang
        elif term.datatype != XSD_STRING:
            out["datatype"] = term.datatype
        return out
    raise TypeError(f"cannot encode {term!r}")


def term_from_json(obj: dict):
    kind = obj["type"]
    value = obj["value"]
    if not isinstance(value, str):
        raise ValueError("binding value must be a string")
    if kind == "uri":
        return IRI(value)
    if kind == "bnode":
        return BNode(value)
    if kind in ("literal", "typed-literal"):
        lang = obj.get("xml:lang")
        if lang:
            return Literal(value, RDF_LANGSTRING, lang)
        return Literal(value, obj.get("datatype", XSD_STRING))
    raise ValueError(f"unknown binding type {kind!r}")


def solutions_from_json(doc: dict) -> SolutionSet | bool:
    """Decode a SPARQL JSON results document; ASK documents decode to a bool."""
    if not isinstance(doc, dict) or "head" not in doc:
        raise ValueError("results document lacks 'head'")
    if "boolean" in doc:
        if not isinstance(doc["boolean"], bool):
            raise ValueError("'boolean' must be true or false")
        return doc["boolean"]
    variables = doc["head"].get("vars", [])
    rows = doc["results"]["bindings"]
    bindings = [{k: term_from_json(v) for k, v in row.items()} for row in rows]
    return SolutionSet(list(variables), bindings)


def boolean_json(value: bool) -> dict:
    return {"head": {}, "boolean": bool(value)}


# --- algebra on bindings ------------------------------------------------------

def compatible(a: dict, b: dict) -> bool:
    if len(a) > len(b):
        a, b = b, a
    for k, v in a.items():
        w = b.get(k)
        if w is not None and w != v:
            return False
    return True


def join(left: Iterable[dict], right: Iterable[dict]) -> list[dict]:
    """Compatible-mapping join (symmetric hash join on the variables both sides always bind)."""
    left = list(left)
    right = list(right)
    if not left or not right:
        return []
    common = set(left[0]).intersection(right[0])
    for mu in left:
        common &= mu.keys()
    for mu in right:
        common &= mu.keys()
    key_vars = sorted(common)
    table = defaultdict(list)
    build, probe, build_left = (left, right, True) if len(left) <= len(right) else (right, left, False)
    for mu in build:
        table[tuple(mu[v] for v in key_vars)].append(mu)
    out = []
    for nu in probe:
        for mu in table.get(tuple(nu[v] for v in key_vars), ()):
            if compatible(mu, nu):
                merged = dict(mu) if build_left else dict(nu)
                merged.update(nu if build_left else mu)
                out.append(merged)
    return out


def distinct(bindings: Iterable[dict]) -> list[dict]:
    seen = set()
    out = []
    for mu in bindings:
        key = frozenset(mu.items())
        if key not in seen:
            seen.add(key)
            out.append(mu)
    return out


def project(bindings: Iterable[dict], variables: Sequence[str]) -> list[dict]:
    return [{v: mu[v] for v in variables if v in mu} for mu in bindings]
