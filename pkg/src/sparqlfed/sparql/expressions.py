"""FILTER expression evaluation with SPARQL error semantics.

Evaluation returns a term or raises ExprError; a FILTER whose expression
errors drops the row, and `||` / `&&` absorb errors the standard way.
"""

from __future__ import annotations

import re
from functools import lru_cache

from ..terms import (
    IRI, NUMERIC_TYPES, RDF_LANGSTRING, XSD_BOOLEAN, XSD_STRING, BNode, Literal, Variable,
    numeric_value,
)
from .ast import BinOp, Call, Not

TRUE = Literal("true", XSD_BOOLEAN)
FALSE = Literal("false", XSD_BOOLEAN)


class ExprError(Exception):
    """Type error or unbound variable during expression evaluation."""


def _bool(value: bool) -> Literal:
    return TRUE if value else FALSE


def _is_numeric(t) -> bool:
    return isinstance(t, Literal) and t.datatype in NUMERIC_TYPES


def _is_string(t) -> bool:
    return isinstance(t, Literal) and t.datatype in (XSD_STRING, RDF_LANGSTRING)


def _number(t):
    v = numeric_value(t)
    if v is None:
        raise ExprError(f"ill-typed numeric literal {t.lexical!r}")
    return v


def ebv(t) -> bool:
    """Effective boolean value."""
    if isinstance(t, Literal):
        if t.datatype == XSD_BOOLEAN:
            if t.lexical in ("true", "1"):
                return True
            if t.lexical in ("false", "0"):
                return False
            raise ExprError("ill-typed boolean")
        if t.datatype in NUMERIC_TYPES:
            v = _number(t)
            return v == v and v != 0  # NaN is false
        if t.datatype in (XSD_STRING, RDF_LANGSTRING):
            return t.lexical != ""
    raise ExprError(f"no effective boolean value for {t!r}")


def _compare(op: str, a, b) -> bool:
    if _is_numeric(a) and _is_numeric(b):
        x, y = _number(a), _number(b)
    elif _is_string(a) and _is_string(b) and op not in ("=", "!="):
        if a.lang != b.lang:
            raise ExprError("cannot order strings with different language tags")
        x, y = a.lexical, b.lexical
    elif (isinstance(a, Literal) and isinstance(b, Literal) and a.datatype == b.datatype == XSD_BOOLEAN
          and op not in ("=", "!=")):
        x, y = ebv(a), ebv(b)
    elif op in ("=", "!="):
        if a == b:
            return op == "="
        # distinct literals of unknown datatypes cannot be declared unequal
        if (isinstance(a, Literal) and isinstance(b, Literal) and a.datatype == b.datatype
                and a.datatype not in (XSD_STRING, RDF_LANGSTRING, XSD_BOOLEAN)
                and a.datatype not in NUMERIC_TYPES):
            raise ExprError("unknown datatype equality")
        if _is_numeric(a) != _is_numeric(b) or not isinstance(a, Literal) or not isinstance(b, Literal):
            return op == "!="
        if a.datatype == b.datatype == XSD_BOOLEAN:
            return (ebv(a) == ebv(b)) == (op == "=")
        return op == "!="
    else:
        raise ExprError(f"cannot compare {a!r} and {b!r}")
    return {"=": x == y, "!=": x != y, "<": x < y, ">": x > y, "<=": x <= y, ">=": x >= y}[op]


@lru_cache(maxsize=256)
def _regex(pattern: str, flags: str):
    f = 0
    for ch in flags:
        if ch == "i":
            f |= re.IGNORECASE
        elif ch == "s":
            f |= re.DOTALL
        elif ch == "m":
            f |= re.MULTILINE
        elif ch == "x":
            f |= re.VERBOSE
        else:
            raise ExprError(f"unknown regex flag {ch!r}")
    try:
        return re.compile(pattern, f)
    except re.error as exc:
        raise ExprError(f"bad regex: {exc}") from None


def _string_arg(t) -> Literal:
    if not _is_string(t):
        raise ExprError("string argument expected")
    return t


def _compatible_args(a: Literal, b: Literal):
    if b.lang and a.lang != b.lang:
        raise ExprError("incompatible string arguments")


def _call(name: str, args: list, row: dict):
    if name == "BOUND":
        return _bool(args[0].name in row and row[args[0].name] is not None)
    vals = [evaluate(a, row) for a in args]
    a = vals[0]
    if name == "STR":
        if isinstance(a, IRI):
            return Literal(a.value)
        if isinstance(a, Literal):
            return Literal(a.lexical)
        raise ExprError("STR of a blank node")
    if name == "LANG":
        if not isinstance(a, Literal):
            raise ExprError("LANG expects a literal")
        return Literal(a.lang or "")
    if name == "DATATYPE":
        if not isinstance(a, Literal):
            raise ExprError("DATATYPE expects a literal")
        return IRI(a.datatype)
    if name in ("ISIRI", "ISURI"):
        return _bool(isinstance(a, IRI))
    if name == "ISLITERAL":
        return _bool(isinstance(a, Literal))
    if name == "ISBLANK":
        return _bool(isinstance(a, BNode))
    if name == "ISNUMERIC":
        return _bool(_is_numeric(a) and numeric_value(a) is not None)
    if name == "SAMETERM":
        return _bool(vals[0] == vals[1])
    if name in ("LCASE", "UCASE"):
        s = _string_arg(a)
        text = s.lexical.lower() if name == "LCASE" else s.lexical.upper()
        return Literal(text, s.datatype, s.lang)
    if name == "LANGMATCHES":
        tag, rng = _string_arg(vals[0]).lexical.lower(), _string_arg(vals[1]).lexical.lower()
        if rng == "*":
            return _bool(tag != "")
        return _bool(tag == rng or tag.startswith(rng + "-"))
    if name in ("CONTAINS", "STRSTARTS", "STRENDS"):
        s, t = _string_arg(vals[0]), _string_arg(vals[1])
        _compatible_args(s, t)
        fn = {"CONTAINS": str.__contains__, "STRSTARTS": str.startswith, "STRENDS": str.endswith}[name]
        return _bool(fn(s.lexical, t.lexical))
    if name == "REGEX":
        s = _string_arg(vals[0])
        pattern = _string_arg(vals[1]).lexical
        flags = _string_arg(vals[2]).lexical if len(vals) > 2 else ""
        return _bool(_regex(pattern, flags).search(s.lexical) is not None)
    raise ExprError(f"unknown function {name}")


def evaluate(e, row: dict):
    """Value of expression `e` under solution `row`."""
    if isinstance(e, Variable):
        value = row.get(e.name)
        if value is None:
            raise ExprError(f"unbound variable ?{e.name}")
        return value
    if isinstance(e, (IRI, Literal, BNode)):
        return e
    if isinstance(e, Not):
        return _bool(not ebv(evaluate(e.expr, row)))
    if isinstance(e, BinOp):
        if e.op in ("||", "&&"):
            return _bool(_logical(e, row))
        return _bool(_compare(e.op, evaluate(e.left, row), evaluate(e.right, row)))
    if isinstance(e, Call):
        return _call(e.name, list(e.args), row)
    raise ExprError(f"cannot evaluate {e!r}")


def _try_ebv(e, row):
    try:
        return ebv(evaluate(e, row))
    except ExprError as exc:
        return exc


def _logical(e: BinOp, row: dict) -> bool:
    left = _try_ebv(e.left, row)
    right = _try_ebv(e.right, row)
    if e.op == "||":
        if left is True or right is True:
            return True
    else:
        if left is False or right is False:
            return False
    for side in (left, right):
        if isinstance(side, ExprError):
            raise side
    return left if e.op == "||" else (left and right)


def filter_passes(e, row: dict) -> bool:
    try:
        return ebv(evaluate(e, row))
    except ExprError:
        return False
