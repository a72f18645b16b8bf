"""Tokenizer shared by the Turtle and SPARQL parsers."""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass


class ParseError(ValueError):
    """Syntax error with a source position.

    `kind` is a short machine-readable tag (syntax, undefined-prefix,
    unbalanced-braces, malformed-service, unsupported-feature) that lets
    callers tell failure modes apart.
    """

    kind = "syntax"

    def __init__(self, message, line=None, column=None, offset=None, expected=None):
        self.message = message
        self.line = line
        self.column = column
        self.offset = offset
        self.expected = expected
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}")

    def to_json(self) -> dict:
        out = {"kind": self.kind, "message": self.message}
        if self.line is not None:
            out["position"] = {"line": self.line, "column": self.column, "offset": self.offset}
        if self.expected:
            out["expected"] = self.expected
        return out


class UndefinedPrefix(ParseError):
    kind = "undefined-prefix"


class UnbalancedBraces(ParseError):
    kind = "unbalanced-braces"


class MalformedService(ParseError):
    kind = "malformed-service"


class UnsupportedFeature(ParseError):
    kind = "unsupported-feature"

    def __init__(self, feature, *args, **kwargs):
        self.feature = feature
        super().__init__(f"unsupported feature: {feature}", *args, **kwargs)


@dataclass(frozen=True, slots=True)
class Token:
    kind: str
    text: str
    offset: int


_PN_LOCAL = r"(?:[A-Za-z0-9_:]|%[0-9A-Fa-f]{2}|\\[_~.\-!$&'()*+,;=/?#@%])(?:[A-Za-z0-9_\-.:]|%[0-9A-Fa-f]{2}|\\[_~.\-!$&'()*+,;=/?#@%])*"

_TOKEN_SPEC = [
    ("WS", r"[ \t\r\n]+"),
    ("COMMENT", r"#[^\n]*"),
    ("IRIREF", r"<[^<>\"{}|^`\\\x00-\x20]*>"),
    ("STRING_LONG", r'"""(?:[^"\\]|\\.|"(?!""))*"""' + r"|'''(?:[^'\\]|\\.|'(?!''))*'''"),
    ("STRING", r'"(?:[^"\\\n\r]|\\.)*"' + r"|'(?:[^'\\\n\r]|\\.)*'"),
    ("BNODE", r"_:[A-Za-z0-9_](?:[A-Za-z0-9_\-.]*[A-Za-z0-9_\-])?"),
    ("VAR", r"[?$][A-Za-z0-9_]+"),
    ("PNAME", r"(?:[A-Za-z](?:[A-Za-z0-9_\-.]*[A-Za-z0-9_\-])?)?:" + f"(?:{_PN_LOCAL})?"),
    ("LANGTAG", r"@[A-Za-z]+(?:-[A-Za-z0-9]+)*"),
    ("NUMBER", r"(?:\d+\.\d*[eE][+-]?\d+|\.\d+[eE][+-]?\d+|\d+[eE][+-]?\d+|\d*\.\d+|\d+)"),
    ("NAME", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("OP", r"\^\^|&&|\|\||!=|<=|>=|[{}()\[\].,;*=<>!+\-/|^?]"),
]
_MASTER = re.compile("|".join(f"(?P<{name}>{rx})" for name, rx in _TOKEN_SPEC))

_STRING_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f",
                   '"': '"', "'": "'", "\\": "\\"}
_UNICODE_ESCAPE = re.compile(r"\\u([0-9A-Fa-f]{4})|\\U([0-9A-Fa-f]{8})")


class Source:
    """Maps offsets to 1-based line/column pairs."""

    def __init__(self, text: str):
        self.text = text
        self._starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def position(self, offset: int) -> tuple[int, int]:
        line = bisect.bisect_right(self._starts, offset) - 1
        return line + 1, offset - self._starts[line] + 1

    def error(self, cls, message, offset, **kwargs):
        line, column = self.position(min(offset, len(self.text)))
        return cls(message, line=line, column=column, offset=offset, **kwargs)


def tokenize(text: str) -> list[Token]:
    src = Source(text)
    out = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _MASTER.match(text, pos)
        if m is None:
            raise src.error(ParseError, f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tok = m.group()
        if kind == "PNAME":
            # a local name may not end with '.'; give trailing dots back
            stripped = tok.rstrip(".")
            if stripped.endswith("\\"):
                stripped += "."
            tok = stripped
        end = pos + len(tok)
        if kind not in ("WS", "COMMENT"):
            if kind == "STRING_LONG":
                kind = "STRING"
            out.append(Token(kind, tok, pos))
        pos = end
    out.append(Token("EOF", "", n))
    return out


def unescape_string(token_text: str) -> str:
    """Lexical value of a quoted string token."""
    if token_text[:3] in ('"""', "'''"):
        body = token_text[3:-3]
    else:
        body = token_text[1:-1]
    body = _UNICODE_ESCAPE.sub(lambda m: chr(int(m.group(1) or m.group(2), 16)), body)
    if "\\" not in body:
        return body
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            nxt = body[i + 1]
            if nxt not in _STRING_ESCAPES:
                raise ValueError(f"invalid escape \\{nxt}")
            out.append(_STRING_ESCAPES[nxt])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def unescape_iri(text: str) -> str:
    if "\\" not in text:
        return text
    return _UNICODE_ESCAPE.sub(lambda m: chr(int(m.group(1) or m.group(2), 16)), text)


def unescape_local(local: str) -> str:
    return re.sub(r"\\(.)", r"\1", local)


class TokenStream:
    """Cursor over tokens with error helpers; base of both parsers."""

    def __init__(self, text: str):
        self.source = Source(text)
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k=1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def at(self, *texts) -> bool:
        t = self.tok
        return t.kind in ("OP", "NAME") and (t.text in texts or t.text.upper() in texts)

    def at_keyword(self, *words) -> bool:
        t = self.tok
        return t.kind == "NAME" and t.text.upper() in words

    def accept(self, *texts) -> Token | None:
        if self.at(*texts):
            return self.advance()
        return None

    def expect(self, *texts) -> Token:
        if self.at(*texts):
            return self.advance()
        raise self.fail(f"expected {' or '.join(repr(t) for t in texts)}", expected=list(texts))

    def fail(self, message, tok: Token | None = None, cls=ParseError, **kwargs):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "EOF" else repr(tok.text)
        return self.source.error(cls, f"{message}, found {found}", tok.offset, **kwargs)
