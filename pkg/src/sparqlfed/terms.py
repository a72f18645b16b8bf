"""RDF terms and the handful of vocabularies the toolkit relies on."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
XSD = "http://www.w3.org/2001/XMLSchema#"
VOID = "http://rdfs.org/ns/void#"
SD = "http://www.w3.org/ns/sparql-service-description#"

RDF_TYPE = RDF + "type"
RDF_LANGSTRING = RDF + "langString"
RDF_FIRST = RDF + "first"
RDF_REST = RDF + "rest"
RDF_NIL = RDF + "nil"
RDFS_DOMAIN = RDFS + "domain"
RDFS_RANGE = RDFS + "range"
RDFS_LITERAL = RDFS + "Literal"
XSD_STRING = XSD + "string"
XSD_INTEGER = XSD + "integer"
XSD_DECIMAL = XSD + "decimal"
XSD_DOUBLE = XSD + "double"
XSD_BOOLEAN = XSD + "boolean"

NUMERIC_TYPES = frozenset(
    XSD + t
    for t in (
        "integer", "decimal", "double", "float", "int", "long", "short", "byte",
        "nonNegativeInteger", "positiveInteger", "negativeInteger",
        "nonPositiveInteger", "unsignedInt", "unsignedLong", "unsignedShort",
        "unsignedByte",
    )
)

_SCHEME = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*:")


class TermError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class IRI:
    value: str

    def __post_init__(self):
        if not _SCHEME.match(self.value):
            raise TermError(f"IRI is not absolute: {self.value!r}")

    def __str__(self):
        return f"<{self.value}>"


@dataclass(frozen=True, slots=True)
class BNode:
    label: str

    def __str__(self):
        return f"_:{self.label}"


@dataclass(frozen=True, slots=True)
class Literal:
    lexical: str
    datatype: str = XSD_STRING
    lang: str | None = None

    def __post_init__(self):
        if self.lang is not None:
            if self.datatype != RDF_LANGSTRING:
                object.__setattr__(self, "datatype", RDF_LANGSTRING)
            object.__setattr__(self, "lang", self.lang.lower())
        elif self.datatype == RDF_LANGSTRING:
            raise TermError("rdf:langString literal requires a language tag")

    @property
    def is_numeric(self) -> bool:
        return self.datatype in NUMERIC_TYPES

    def __str__(self):
        text = '"' + escape_string(self.lexical) + '"'
        if self.lang:
            return f"{text}@{self.lang}"
        if self.datatype != XSD_STRING:
            return f"{text}^^<{self.datatype}>"
        return text


@dataclass(frozen=True, slots=True)
class Variable:
    name: str

    def __str__(self):
        return f"?{self.name}"


Term = Union[IRI, BNode, Literal]
PatternTerm = Union[IRI, BNode, Literal, Variable]

_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t",
            "\b": "\\b", "\f": "\\f"}


def escape_string(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def term_key(term) -> tuple:
    """Total order over terms, used wherever output must be deterministic."""
    if isinstance(term, IRI):
        return (1, term.value, "", "")
    if isinstance(term, BNode):
        return (0, term.label, "", "")
    if isinstance(term, Literal):
        return (2, term.lexical, term.datatype, term.lang or "")
    if isinstance(term, Variable):
        return (3, term.name, "", "")
    if term is None:
        return (-1, "", "", "")
    raise TypeError(f"not a term: {term!r}")


def numeric_value(lit: Literal):
    """Python number for a numeric literal, or None when the lexical form is ill-typed."""
    try:
        if lit.datatype in (XSD_DOUBLE, XSD + "float"):
            return float(lit.lexical)
        if lit.datatype == XSD_DECIMAL:
            from decimal import Decimal
            return Decimal(lit.lexical)
        return int(lit.lexical)
    except (ValueError, ArithmeticError):
        return None


def namespace_of(iri: str) -> str:
    """IRI prefix up to and including the last '#' or '/'."""
    cut = max(iri.rfind("#"), iri.rfind("/"))
    return iri[: cut + 1] if cut >= 0 else iri
