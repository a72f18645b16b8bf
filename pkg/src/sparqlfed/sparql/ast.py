"""Immutable algebra nodes for the supported SPARQL subset.

Patterns: BGP, Service, Union, Join, Filter, Values, GraphPattern.
Expressions: variables and terms as leaves, BinOp, Not, Call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union as _U

from ..graph import TriplePattern
from ..terms import IRI, Variable


@dataclass(frozen=True)
class BGP:
    patterns: tuple[TriplePattern, ...] = ()


@dataclass(frozen=True)
class Service:
    endpoint: IRI
    pattern: "Pattern"
    silent: bool = False


@dataclass(frozen=True)
class Union:
    branches: tuple["Pattern", ...]


@dataclass(frozen=True)
class Join:
    children: tuple["Pattern", ...]


@dataclass(frozen=True)
class Filter:
    pattern: "Pattern"
    expr: "Expression"


@dataclass(frozen=True)
class Values:
    variables: tuple[str, ...]
    rows: tuple[tuple, ...]  # entries are terms or None for UNDEF


@dataclass(frozen=True)
class GraphPattern:
    name: object  # IRI or Variable
    pattern: "Pattern"


Pattern = _U[BGP, Service, Union, Join, Filter, Values, GraphPattern]


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Not:
    expr: "Expression"


@dataclass(frozen=True)
class Call:
    name: str  # upper-cased builtin name
    args: tuple["Expression", ...]


Expression = _U[BinOp, Not, Call, Variable, object]


@dataclass(frozen=True)
class Count:
    var: Optional[str]  # None means COUNT(*)
    alias: str
    distinct: bool = False


@dataclass(frozen=True)
class Query:
    form: str  # "SELECT" or "ASK"
    pattern: Pattern
    projection: Optional[tuple] = None  # None is '*'; items are variable names or Count
    distinct: bool = False
    group_by: tuple[str, ...] = ()
    limit: Optional[int] = None
    offset: Optional[int] = None
    prefixes: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def aggregates(self) -> list[Count]:
        return [item for item in self.projection or () if isinstance(item, Count)]

    def output_variables(self) -> Optional[list[str]]:
        if self.projection is None:
            return None
        return [item.alias if isinstance(item, Count) else item for item in self.projection]
