"""Tokenizer and recursive-descent parser for the supported SPARQL subset.

Grammar: ``SELECT [DISTINCT] ?v... WHERE { triple patterns / VALUES blocks /
FILTER comparisons }`` with optional ``ORDER BY [ASC|DESC](?v | xsd:T(?v))``
and ``LIMIT n``. PREFIX declarations and the ``ns:`` prefix are consumed and
stripped so terms match the bare IRIs stored in the KB.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from ..kb import IRI, LITERAL, Term
from .ast import CAST_DATATYPES, FilterExpr, OrderBy, QueryAst, TriplePattern, Variable
from .errors import SparqlParseError

_KEYWORDS = {"select", "distinct", "where", "values", "filter", "order", "by", "asc", "desc", "limit", "prefix"}

# A dot stays inside a name token only when followed by another name character,
# so the pattern separator "." never gets swallowed.
_NAME_RE = re.compile(r"[A-Za-z_](?:[\w:\-/#]|\.(?=[\w:\-/#]))*")
_NUMBER_RE = re.compile(r"\d+")
_BRACKET_IRI_RE = re.compile(r"<([^<>\s]*)>")
_VAR_RE = re.compile(r"\?(\w+)")

_ESCAPES = {'"': '"', "'": "'", "t": "\t", "n": "\n", "r": "\r", "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str  # keyword | name | var | iri | literal | number | punct | op | eof
    text: str
    line: int
    col: int
    value: Optional[Term] = None


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def _error(self, message: str) -> SparqlParseError:
        return SparqlParseError(message, self.line, self.col)

    def _advance(self, n: int) -> None:
        for c in self.text[self.pos : self.pos + n]:
            if c == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += n

    def _literal(self) -> Token:
        line, col = self.line, self.col
        out = []
        i = self.pos + 1
        while i < len(self.text):
            c = self.text[i]
            if c == "\\":
                if i + 1 >= len(self.text):
                    raise self._error("dangling escape in literal")
                out.append(_ESCAPES.get(self.text[i + 1], "\\" + self.text[i + 1]))
                i += 2
            elif c == '"':
                i += 1
                datatype = None
                if self.text.startswith("^^", i):
                    i += 2
                    m = _BRACKET_IRI_RE.match(self.text, i) or _NAME_RE.match(self.text, i)
                    if not m:
                        raise self._error("expected datatype after ^^")
                    datatype = m.group(1) if m.re is _BRACKET_IRI_RE else m.group(0)
                    i = m.end()
                token_text = self.text[self.pos : i]
                self._advance(i - self.pos)
                return Token("literal", token_text, line, col, Term(LITERAL, "".join(out), datatype))
            elif c == "\n":
                raise self._error("unterminated string literal")
            else:
                out.append(c)
                i += 1
        raise self._error("unterminated string literal")

    def tokens(self) -> list[Token]:
        out = []
        while self.pos < len(self.text):
            c = self.text[self.pos]
            line, col = self.line, self.col
            if c.isspace():
                self._advance(1)
                continue
            if c == "#":
                end = self.text.find("\n", self.pos)
                self._advance((end if end >= 0 else len(self.text)) - self.pos)
                continue
            if c == '"':
                out.append(self._literal())
                continue
            if c in "{}().":
                out.append(Token("punct", c, line, col))
                self._advance(1)
                continue
            if c == "?":
                m = _VAR_RE.match(self.text, self.pos)
                if not m:
                    raise self._error("expected variable name after '?'")
                out.append(Token("var", m.group(0), line, col))
                self._advance(m.end() - self.pos)
                continue
            if c == "<":
                m = _BRACKET_IRI_RE.match(self.text, self.pos)
                if m:
                    if not m.group(1):
                        raise self._error("empty <> IRI")
                    out.append(Token("iri", m.group(0), line, col, Term(IRI, m.group(1))))
                    self._advance(m.end() - self.pos)
                    continue
                op = "<=" if self.text.startswith("<=", self.pos) else "<"
                out.append(Token("op", op, line, col))
                self._advance(len(op))
                continue
            if c == ">":
                op = ">=" if self.text.startswith(">=", self.pos) else ">"
                out.append(Token("op", op, line, col))
                self._advance(len(op))
                continue
            if c == "=":
                out.append(Token("op", "=", line, col))
                self._advance(1)
                continue
            if c == "!":
                if not self.text.startswith("!=", self.pos):
                    raise self._error("expected '!='")
                out.append(Token("op", "!=", line, col))
                self._advance(2)
                continue
            m = _NAME_RE.match(self.text, self.pos)
            if m:
                word = m.group(0)
                kind = "keyword" if word.lower() in _KEYWORDS else "name"
                out.append(Token(kind, word, line, col))
                self._advance(m.end() - self.pos)
                continue
            m = _NUMBER_RE.match(self.text, self.pos)
            if m:
                out.append(Token("number", m.group(0), line, col))
                self._advance(m.end() - self.pos)
                continue
            raise self._error(f"unexpected character {c!r}")
        out.append(Token("eof", "", self.line, self.col))
        return out


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0
        self.prefixes = {"ns:"}

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def _error(self, message: str, tok: Optional[Token] = None) -> SparqlParseError:
        tok = tok or self.peek()
        return SparqlParseError(message, tok.line, tok.col)

    def expect_keyword(self, word: str) -> Token:
        tok = self.next()
        if tok.kind != "keyword" or tok.text.lower() != word:
            got = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise self._error(f"expected {word.upper()}, got {got}", tok)
        return tok

    def expect_punct(self, text: str) -> Token:
        tok = self.next()
        if tok.kind != "punct" or tok.text != text:
            got = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise self._error(f"expected {text!r}, got {got}", tok)
        return tok

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "keyword" and tok.text.lower() == word

    def at_punct(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "punct" and tok.text == text

    def strip_prefix(self, name: str) -> str:
        for prefix in sorted(self.prefixes, key=len, reverse=True):
            if name.startswith(prefix) and len(name) > len(prefix):
                return name[len(prefix) :]
        return name

    def term_from(self, tok: Token) -> Term:
        if tok.kind == "literal":
            return tok.value
        if tok.kind == "iri":
            return Term(IRI, self.strip_prefix(tok.value.value))
        if tok.kind in ("name", "keyword"):
            return Term(IRI, self.strip_prefix(tok.text))
        raise self._error(f"expected a term, got {tok.text!r}", tok)

    def parse_slot(self):
        tok = self.next()
        if tok.kind == "var":
            return Variable(tok.text[1:])
        return self.term_from(tok)

    def parse_prologue(self) -> None:
        while self.at_keyword("prefix"):
            self.next()
            tok = self.next()
            if tok.kind != "name" or not tok.text.endswith(":"):
                raise self._error("expected prefix name ending in ':'", tok)
            iri_tok = self.next()
            if iri_tok.kind != "iri":
                raise self._error("expected <iri> in PREFIX declaration", iri_tok)
            self.prefixes.add(tok.text)

    def parse_values(self) -> tuple[str, tuple[Term, ...]]:
        self.next()  # VALUES
        var_tok = self.next()
        if var_tok.kind != "var":
            raise self._error("expected variable after VALUES", var_tok)
        self.expect_punct("{")
        terms = []
        while not self.at_punct("}"):
            tok = self.next()
            if tok.kind == "eof":
                raise self._error("unexpected end of input in VALUES block", tok)
            terms.append(self.term_from(tok))
        self.expect_punct("}")
        if not terms:
            raise self._error("empty VALUES block", var_tok)
        return var_tok.text[1:], tuple(terms)

    def parse_filter(self) -> FilterExpr:
        self.next()  # FILTER
        self.expect_punct("(")
        tok = self.next()
        cast = None
        if tok.kind in ("name", "keyword") and tok.text in CAST_DATATYPES:
            cast = tok.text
            self.expect_punct("(")
            var_tok = self.next()
            if var_tok.kind != "var":
                raise self._error("expected variable inside cast", var_tok)
            self.expect_punct(")")
        elif tok.kind == "var":
            var_tok = tok
        else:
            raise self._error("expected variable or cast in FILTER", tok)
        op_tok = self.next()
        if op_tok.kind != "op":
            raise self._error("expected comparison operator in FILTER", op_tok)
        rhs_tok = self.next()
        if rhs_tok.kind != "literal":
            raise self._error("FILTER right-hand side must be a literal", rhs_tok)
        self.expect_punct(")")
        try:
            return FilterExpr(var_tok.text[1:], op_tok.text, rhs_tok.value, cast)
        except ValueError as exc:
            raise self._error(str(exc), op_tok) from exc

    def parse_group(self):
        patterns: list[TriplePattern] = []
        values: list[tuple[str, tuple[Term, ...]]] = []
        filters: list[FilterExpr] = []
        self.expect_punct("{")
        while True:
            if self.at_punct("}"):
                self.next()
                return tuple(patterns), tuple(values), tuple(filters)
            if self.peek().kind == "eof":
                raise self._error("unexpected end of input, expected '}'")
            if self.at_keyword("values"):
                values.append(self.parse_values())
            elif self.at_keyword("filter"):
                filters.append(self.parse_filter())
            else:
                first = self.peek()
                s = self.parse_slot()
                p = self.parse_slot()
                o = self.parse_slot()
                try:
                    patterns.append(TriplePattern(s, p, o))
                except ValueError as exc:
                    raise self._error(str(exc), first) from exc
            if self.at_punct("."):
                self.next()

    def parse_order_by(self) -> OrderBy:
        self.expect_keyword("by")
        descending = False
        explicit_dir = False
        if self.at_keyword("asc") or self.at_keyword("desc"):
            descending = self.next().text.lower() == "desc"
            explicit_dir = True
            self.expect_punct("(")
        cast = None
        tok = self.next()
        if tok.kind in ("name", "keyword") and tok.text in CAST_DATATYPES:
            cast = tok.text
            self.expect_punct("(")
            tok = self.next()
            if tok.kind != "var":
                raise self._error("expected variable inside cast", tok)
            var = tok.text[1:]
            self.expect_punct(")")
        elif tok.kind == "var":
            var = tok.text[1:]
        else:
            raise self._error("expected variable or cast after ORDER BY", tok)
        if explicit_dir:
            self.expect_punct(")")
        return OrderBy(var, descending, cast)

    def parse(self) -> QueryAst:
        self.parse_prologue()
        self.expect_keyword("select")
        distinct = False
        if self.at_keyword("distinct"):
            self.next()
            distinct = True
        select_vars = []
        while self.peek().kind == "var":
            select_vars.append(self.next().text[1:])
        if not select_vars:
            raise self._error("expected at least one SELECT variable")
        self.expect_keyword("where")
        patterns, values, filters = self.parse_group()
        order_by = None
        limit = None
        if self.at_keyword("order"):
            self.next()
            order_by = self.parse_order_by()
        if self.at_keyword("limit"):
            limit_kw = self.next()
            tok = self.next()
            text = tok.text
            if tok.kind == "number" or (tok.kind == "name" and text.isdigit()):
                limit = int(text)
            else:
                raise self._error("expected integer after LIMIT", tok)
            if limit < 1:
                raise self._error("LIMIT must be positive", limit_kw)
        tok = self.peek()
        if tok.kind != "eof":
            raise self._error(f"unexpected trailing token {tok.text!r}", tok)
        ast = QueryAst(tuple(select_vars), distinct, patterns, values, filters, order_by, limit)
        try:
            ast.validate()
        except ValueError as exc:
            raise SparqlParseError(str(exc), tok.line, tok.col) from exc
        return ast


def parse_query(text: str) -> QueryAst:
    """Parse a query string, raising SparqlParseError with 1-based position."""
    return _Parser(_Tokenizer(text).tokens()).parse()
