"""Recursive-descent parser for the SPARQL subset.

Accepted productions (everything else is rejected with UnsupportedFeature):

    Query        := Prologue ( SelectQuery | AskQuery ) EOF
    Prologue     := ( 'BASE' IRIREF | 'PREFIX' PNAME_NS IRIREF )*
    SelectQuery  := 'SELECT' ( 'DISTINCT' | 'REDUCED' )? ( '*' | SelectItem+ )
                    'WHERE'? Group GroupBy? LimitOffset?
    SelectItem   := Var | '(' 'COUNT' '(' 'DISTINCT'? ( '*' | Var ) ')' 'AS' Var ')'
    AskQuery     := 'ASK' 'WHERE'? Group LimitOffset?
    GroupBy      := 'GROUP' 'BY' Var+
    LimitOffset  := ( 'LIMIT' INTEGER | 'OFFSET' INTEGER )*
    Group        := '{' ( Triples | 'FILTER' Constraint | Service | GraphGraph
                        | InlineData | GroupOrUnion ) * '}'
    GroupOrUnion := Group ( 'UNION' Group )*
    Service      := 'SERVICE' 'SILENT'? IRI Group
    GraphGraph   := 'GRAPH' ( Var | IRI ) Group
    InlineData   := 'VALUES' ( Var '{' Value* '}' | '(' Var* ')' '{' ( '(' Value* ')' )* '}' )
    Constraint   := '(' Expr ')' | BuiltinCall
    Expr         := And ( '||' And )*
    And          := Rel ( '&&' Rel )*
    Rel          := Unary ( ( '=' | '!=' | '<' | '>' | '<=' | '>=' ) Unary )?
    Unary        := '!' Unary | Primary
    Primary      := '(' Expr ')' | BuiltinCall | Var | IRI | Literal
"""

from __future__ import annotations

from ..graph import TriplePattern
from ..lexer import (
    MalformedService, ParseError, Token, TokenStream, UnbalancedBraces, UndefinedPrefix,
    UnsupportedFeature, tokenize, unescape_iri, unescape_local, unescape_string,
)
from ..terms import (
    IRI, RDF_TYPE, XSD_BOOLEAN, XSD_DECIMAL, XSD_DOUBLE, XSD_INTEGER, XSD_STRING, BNode,
    Literal, TermError, Variable,
)
from .ast import BGP, BinOp, Call, Count, Filter, GraphPattern, Join, Not, Query, Service, Union, Values

BUILTINS = {
    "REGEX": (2, 3), "STR": (1, 1), "LANG": (1, 1), "DATATYPE": (1, 1), "BOUND": (1, 1),
    "ISIRI": (1, 1), "ISURI": (1, 1), "ISLITERAL": (1, 1), "ISBLANK": (1, 1),
    "ISNUMERIC": (1, 1), "CONTAINS": (2, 2), "STRSTARTS": (2, 2), "STRENDS": (2, 2),
    "LCASE": (1, 1), "UCASE": (1, 1), "LANGMATCHES": (2, 2), "SAMETERM": (2, 2),
}
_REJECTED_AGGREGATES = {"SUM", "AVG", "MIN", "MAX", "SAMPLE", "GROUP_CONCAT"}
_REJECTED_KEYWORDS = {
    "OPTIONAL": "OPTIONAL", "MINUS": "MINUS", "BIND": "BIND",
    "EXISTS": "EXISTS", "NOT": "NOT EXISTS",
}
_UPDATE = {"INSERT", "DELETE", "LOAD", "CLEAR", "CREATE", "DROP", "COPY", "MOVE", "ADD", "WITH"}
_RELATIONAL = ("=", "!=", "<", ">", "<=", ">=")


def check_braces(text: str, tokens: list[Token] | None = None):
    """Raise UnbalancedBraces at the first unmatched '{' or '}'."""
    tokens = tokens if tokens is not None else tokenize(text)
    stack = []
    from ..lexer import Source
    src = Source(text)
    for tok in tokens:
        if tok.kind != "OP":
            continue
        if tok.text == "{":
            stack.append(tok)
        elif tok.text == "}":
            if not stack:
                raise src.error(UnbalancedBraces, "unmatched '}'", tok.offset)
            stack.pop()
    if stack:
        raise src.error(UnbalancedBraces, "unclosed '{'", stack[-1].offset)


class _SparqlParser(TokenStream):
    def __init__(self, text: str):
        super().__init__(text)
        self.prefixes: dict[str, str] = {}
        self.base: str | None = None
        self.fresh = 0

    def unsupported(self, feature, tok: Token | None = None) -> UnsupportedFeature:
        tok = tok or self.tok
        line, column = self.source.position(tok.offset)
        return UnsupportedFeature(feature, line=line, column=column, offset=tok.offset)

    # prologue and query forms

    def query(self) -> Query:
        self.prologue()
        tok = self.tok
        word = tok.text.upper() if tok.kind == "NAME" else ""
        if word == "SELECT":
            q = self.select()
        elif word == "ASK":
            self.advance()
            self.dataset_clause()
            self.accept("WHERE")
            pattern = self.group()
            limit, offset = self.modifiers(allow_group=False)
            q = Query("ASK", pattern, limit=limit, offset=offset, prefixes=dict(self.prefixes))
        elif word in ("CONSTRUCT", "DESCRIBE"):
            raise self.unsupported(f"{word} query")
        elif word in _UPDATE:
            raise self.unsupported("SPARQL Update")
        else:
            raise self.fail("expected SELECT or ASK", expected=["SELECT", "ASK"])
        if self.tok.kind != "EOF":
            if self.at_keyword("VALUES"):
                raise self.unsupported("trailing VALUES")
            raise self.fail("unexpected trailing input")
        return q

    def prologue(self):
        while True:
            if self.at_keyword("PREFIX"):
                self.advance()
                name = self.advance()
                if name.kind != "PNAME" or not name.text.endswith(":"):
                    raise self.fail("expected a prefix name like 'ex:'", name)
                iri = self.advance()
                if iri.kind != "IRIREF":
                    raise self.fail("expected an IRI in angle brackets", iri)
                value = self.resolve(unescape_iri(iri.text[1:-1]))
                if value is None:
                    raise self.fail("prefix IRI must be absolute", iri, cls=UndefinedPrefix)
                self.prefixes[name.text[:-1]] = value
            elif self.at_keyword("BASE"):
                self.advance()
                iri = self.advance()
                if iri.kind != "IRIREF":
                    raise self.fail("expected an IRI in angle brackets", iri)
                self.base = unescape_iri(iri.text[1:-1])
            else:
                return

    def resolve(self, ref: str) -> str | None:
        try:
            return IRI(ref).value
        except TermError:
            if self.base is None:
                return None
            from urllib.parse import urljoin
            return urljoin(self.base, ref)

    def dataset_clause(self):
        if self.at_keyword("FROM"):
            raise self.unsupported("FROM dataset clause")

    def select(self) -> Query:
        self.advance()
        distinct = False
        if self.accept("DISTINCT"):
            distinct = True
        elif self.accept("REDUCED"):
            pass
        projection: list | None
        if self.accept("*"):
            projection = None
        else:
            projection = []
            while self.tok.kind == "VAR" or self.at("("):
                if self.tok.kind == "VAR":
                    projection.append(self.advance().text[1:])
                else:
                    projection.append(self.select_expression())
            if not projection:
                raise self.fail("expected '*' or projection variables", expected=["*", "?var"])
        self.dataset_clause()
        self.accept("WHERE")
        if not self.at("{"):
            raise self.fail("expected '{' to open the WHERE clause", expected=["{"])
        pattern = self.group()
        group_by: list[str] = []
        if self.at_keyword("GROUP"):
            self.advance()
            self.expect("BY")
            while self.tok.kind == "VAR":
                group_by.append(self.advance().text[1:])
            if not group_by:
                if self.at("("):
                    raise self.unsupported("GROUP BY expressions")
                raise self.fail("expected variables after GROUP BY")
        limit, offset = self.modifiers(allow_group=True)
        if projection is not None:
            names = [p.alias if isinstance(p, Count) else p for p in projection]
            if len(set(names)) != len(names):
                raise self.fail("duplicate projection variable")
            has_agg = any(isinstance(p, Count) for p in projection)
            if has_agg or group_by:
                for p in projection:
                    if isinstance(p, str) and p not in group_by:
                        raise self.fail(f"variable ?{p} is projected but not grouped")
        elif group_by:
            raise self.fail("SELECT * is not allowed with GROUP BY")
        return Query("SELECT", pattern, tuple(projection) if projection is not None else None,
                     distinct, tuple(group_by), limit, offset, dict(self.prefixes))

    def select_expression(self) -> Count:
        self.expect("(")
        tok = self.tok
        word = tok.text.upper() if tok.kind == "NAME" else ""
        if word in _REJECTED_AGGREGATES:
            raise self.unsupported(f"aggregate {word}", tok)
        if word != "COUNT":
            raise self.unsupported("SELECT expressions other than COUNT", tok)
        self.advance()
        self.expect("(")
        dist = bool(self.accept("DISTINCT"))
        if self.accept("*"):
            var = None
        elif self.tok.kind == "VAR":
            var = self.advance().text[1:]
        else:
            raise self.fail("expected '*' or a variable inside COUNT", expected=["*", "?var"])
        self.expect(")")
        self.expect("AS")
        if self.tok.kind != "VAR":
            raise self.fail("expected a variable after AS", expected=["?var"])
        alias = self.advance().text[1:]
        self.expect(")")
        return Count(var, alias, dist)

    def modifiers(self, allow_group: bool):
        limit = offset = None
        while True:
            if self.at_keyword("LIMIT"):
                self.advance()
                limit = self.integer()
            elif self.at_keyword("OFFSET"):
                self.advance()
                offset = self.integer()
            elif self.at_keyword("ORDER"):
                raise self.unsupported("ORDER BY")
            elif self.at_keyword("HAVING"):
                raise self.unsupported("HAVING")
            elif self.at_keyword("GROUP") and not allow_group:
                raise self.unsupported("GROUP BY in ASK")
            else:
                return limit, offset

    def integer(self) -> int:
        tok = self.tok
        if tok.kind != "NUMBER" or not tok.text.isdigit():
            raise self.fail("expected a non-negative integer", expected=["INTEGER"])
        self.advance()
        return int(tok.text)

    # graph patterns

    def group(self):
        open_tok = self.expect("{")
        if self.at_keyword("SELECT"):
            raise self.unsupported("subquery")
        elements: list = []
        filters: list = []
        last_was_triples = False
        while not self.at("}"):
            tok = self.tok
            if tok.kind == "EOF":
                raise self.source.error(UnbalancedBraces, "unclosed '{'", open_tok.offset)
            word = tok.text.upper() if tok.kind == "NAME" else ""
            if word == "FILTER":
                self.advance()
                filters.append(self.constraint())
            elif word in _REJECTED_KEYWORDS:
                feature = _REJECTED_KEYWORDS[word]
                raise self.unsupported(feature)
            elif word == "SERVICE":
                elements.append(self.service())
                last_was_triples = False
            elif word == "GRAPH":
                self.advance()
                if self.tok.kind == "VAR":
                    name = Variable(self.advance().text[1:])
                else:
                    name = self.iri()
                elements.append(GraphPattern(name, self.group()))
                last_was_triples = False
            elif word == "VALUES":
                elements.append(self.values())
                last_was_triples = False
            elif self.at("{"):
                elements.append(self.group_or_union())
                last_was_triples = False
            else:
                triples = self.triples_block()
                if last_was_triples:
                    elements[-1] = BGP(elements[-1].patterns + triples)
                else:
                    elements.append(BGP(triples))
                last_was_triples = True
                continue
            self.accept(".")
        self.advance()
        if not elements:
            pattern = BGP(())
        elif len(elements) == 1:
            pattern = elements[0]
        else:
            pattern = Join(tuple(elements))
        for expr in filters:
            pattern = Filter(pattern, expr)
        return pattern

    def group_or_union(self):
        branches = [self.group()]
        while self.at_keyword("UNION"):
            self.advance()
            if not self.at("{"):
                raise self.fail("expected '{' after UNION", expected=["{"])
            branches.append(self.group())
        return branches[0] if len(branches) == 1 else Union(tuple(branches))

    def service(self):
        self.advance()
        silent = bool(self.accept("SILENT"))
        tok = self.tok
        if tok.kind == "VAR":
            raise self.unsupported("SERVICE with a variable endpoint", tok)
        if tok.kind not in ("IRIREF", "PNAME"):
            raise self.fail("SERVICE must be followed by an endpoint IRI", tok,
                            cls=MalformedService, expected=["<endpoint IRI>"])
        if tok.kind == "IRIREF":
            self.advance()
            value = self.resolve(unescape_iri(tok.text[1:-1]))
            if value is None:
                raise self.fail("SERVICE endpoint must be an absolute IRI", tok, cls=MalformedService)
            endpoint = IRI(value)
        else:
            endpoint = self.iri()
        if not self.at("{"):
            raise self.fail(f"SERVICE <{endpoint.value}> must be followed by a '{{ ... }}' group",
                            cls=MalformedService, expected=["{"])
        return Service(endpoint, self.group(), silent)

    def values(self):
        self.advance()
        if self.tok.kind == "VAR":
            variables = (self.advance().text[1:],)
            self.expect("{")
            rows = []
            while not self.at("}"):
                rows.append((self.data_value(),))
            self.advance()
            return Values(variables, tuple(rows))
        self.expect("(")
        names = []
        while self.tok.kind == "VAR":
            names.append(self.advance().text[1:])
        self.expect(")")
        self.expect("{")
        rows = []
        while not self.at("}"):
            self.expect("(")
            row = []
            while not self.at(")"):
                row.append(self.data_value())
            self.advance()
            if len(row) != len(names):
                raise self.fail(f"VALUES row has {len(row)} entries, expected {len(names)}")
            rows.append(tuple(row))
        self.advance()
        return Values(tuple(names), tuple(rows))

    def data_value(self):
        if self.at_keyword("UNDEF"):
            self.advance()
            return None
        tok = self.tok
        if tok.kind in ("IRIREF", "PNAME"):
            return self.iri()
        if tok.kind == "EOF" or self.at("}"):
            raise self.fail("expected a data value")
        return self.literal()

    def triples_block(self) -> tuple:
        out: list[TriplePattern] = []
        while True:
            self.triples_same_subject(out)
            if not self.accept("."):
                break
            if not self.starts_term():
                break
        return tuple(out)

    def starts_term(self) -> bool:
        tok = self.tok
        if tok.kind in ("VAR", "IRIREF", "PNAME", "BNODE", "STRING", "NUMBER"):
            return True
        if tok.kind == "NAME" and tok.text in ("true", "false"):
            return True
        return self.at("[", "(")

    def triples_same_subject(self, out):
        if self.at("["):
            subject = self.blank_node_property_list(out)
            if not self.starts_predicate():
                return
        else:
            subject = self.var_or_term(position="subject")
        self.property_list(subject, out)

    def starts_predicate(self) -> bool:
        tok = self.tok
        return tok.kind in ("VAR", "IRIREF", "PNAME") or (tok.kind == "NAME" and tok.text == "a") or self.at("^")

    def property_list(self, subject, out):
        while True:
            pred = self.verb()
            while True:
                obj = self.var_or_term(position="object", out=out)
                out.append(TriplePattern(subject, pred, obj))
                if not self.accept(","):
                    break
            if not self.accept(";"):
                return
            while self.accept(";"):
                pass
            if not self.starts_predicate():
                return

    def verb(self):
        tok = self.tok
        if self.at("^", "!", "("):
            raise self.unsupported("property paths")
        if tok.kind == "NAME" and tok.text == "a":
            self.advance()
            pred = IRI(RDF_TYPE)
        elif tok.kind == "VAR":
            pred = Variable(self.advance().text[1:])
        elif tok.kind in ("IRIREF", "PNAME"):
            pred = self.iri()
        else:
            raise self.fail("expected a predicate", expected=["IRI", "?var", "a"])
        if self.at("/", "|", "*", "+", "?"):
            raise self.unsupported("property paths")
        return pred

    def blank_node_property_list(self, out):
        self.expect("[")
        self.fresh += 1
        node = BNode(f"anon{self.fresh}")
        if not self.at("]"):
            self.property_list(node, out)
        self.expect("]")
        return node

    def var_or_term(self, position, out=None):
        tok = self.tok
        if tok.kind == "VAR":
            self.advance()
            return Variable(tok.text[1:])
        if tok.kind in ("IRIREF", "PNAME"):
            return self.iri()
        if tok.kind == "BNODE":
            self.advance()
            return BNode(tok.text[2:])
        if self.at("["):
            if out is None:
                raise self.fail("unexpected '['")
            return self.blank_node_property_list(out)
        if self.at("("):
            raise self.unsupported("RDF collections in patterns")
        if position == "subject" and tok.kind not in ("STRING", "NUMBER"):
            raise self.fail("expected a triple pattern or '}'", expected=["?var", "IRI", "}"])
        return self.literal()

    def iri(self) -> IRI:
        tok = self.advance()
        if tok.kind == "IRIREF":
            value = self.resolve(unescape_iri(tok.text[1:-1]))
            if value is None:
                raise self.fail("relative IRI without BASE", tok)
            return IRI(value)
        if tok.kind == "PNAME":
            prefix, _, local = tok.text.partition(":")
            if prefix not in self.prefixes:
                raise self.fail(f"undefined prefix '{prefix}:'", tok, cls=UndefinedPrefix)
            try:
                return IRI(self.prefixes[prefix] + unescape_local(local))
            except TermError as exc:
                raise self.fail(str(exc), tok, cls=UndefinedPrefix) from None
        raise self.fail("expected an IRI", tok, expected=["IRI"])

    def literal(self) -> Literal:
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
        if tok.kind == "NAME" and tok.text.lower() in ("true", "false"):
            self.advance()
            return Literal(tok.text.lower(), XSD_BOOLEAN)
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
        raise self.fail("expected an RDF term", expected=["IRI", "literal", "?var"])

    # expressions

    def constraint(self):
        if self.at("("):
            self.advance()
            expr = self.expression()
            self.expect(")")
            return expr
        if self.tok.kind == "NAME":
            return self.builtin_call()
        raise self.fail("expected '(' after FILTER", expected=["("])

    def expression(self):
        left = self.conjunction()
        while self.accept("||"):
            left = BinOp("||", left, self.conjunction())
        return left

    def conjunction(self):
        left = self.relational()
        while self.accept("&&"):
            left = BinOp("&&", left, self.relational())
        return left

    def relational(self):
        left = self.unary()
        tok = self.tok
        if tok.kind == "OP" and tok.text in _RELATIONAL:
            self.advance()
            return BinOp(tok.text, left, self.unary())
        if self.at_keyword("IN") or (self.at_keyword("NOT") and self.peek().text.upper() == "IN"):
            raise self.unsupported("IN / NOT IN")
        if tok.kind == "OP" and tok.text in ("+", "-", "*", "/"):
            raise self.unsupported("arithmetic expressions")
        return left

    def unary(self):
        if self.accept("!"):
            return Not(self.unary())
        return self.primary()

    def primary(self):
        tok = self.tok
        if self.at("("):
            self.advance()
            expr = self.expression()
            self.expect(")")
            return expr
        if tok.kind == "VAR":
            self.advance()
            return Variable(tok.text[1:])
        if tok.kind in ("IRIREF", "PNAME"):
            iri = self.iri()
            if self.at("("):
                raise self.unsupported("extension function calls")
            return iri
        if tok.kind == "NAME" and tok.text.lower() not in ("true", "false"):
            return self.builtin_call()
        return self.literal()

    def builtin_call(self):
        tok = self.advance()
        name = tok.text.upper()
        if name in ("EXISTS", "NOT"):
            raise self.unsupported("EXISTS / NOT EXISTS", tok)
        if name not in BUILTINS:
            raise self.unsupported(f"function {name}", tok)
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.expression())
            while self.accept(","):
                args.append(self.expression())
        self.expect(")")
        lo, hi = BUILTINS[name]
        if not lo <= len(args) <= hi:
            raise self.fail(f"{name} takes {lo}..{hi} arguments", tok)
        if name == "BOUND" and not isinstance(args[0], Variable):
            raise self.fail("BOUND expects a variable", tok)
        return Call(name, tuple(args))


def parse_query(text: str) -> Query:
    """Parse SPARQL text into a Query, expanding prefixed names to absolute IRIs."""
    parser = _SparqlParser(text)
    check_braces(text, parser.tokens)
    return parser.query()


__all__ = ["parse_query", "ParseError", "check_braces"]
