"""Parser for conjunctive SELECT queries (basic graph patterns only)."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Iterator, Union

from .errors import QuerySyntaxError, UnsupportedFeatureError
from .ingest import RDF_TYPE, Term, TermKind

XSD = "http://www.w3.org/2001/XMLSchema#"


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class Constant:
    value: Any  # a Term before resolution, a term id (or None if unknown) after

    def __str__(self) -> str:
        v = self.value
        return v.to_ntriples() if isinstance(v, Term) else f"#{v}"


Node = Union[Variable, Constant]


@dataclass(frozen=True)
class TriplePattern:
    s: Node
    p: Node
    o: Node

    def variables(self) -> list[str]:
        out = []
        for n in (self.s, self.p, self.o):
            if isinstance(n, Variable) and n.name not in out:
                out.append(n.name)
        return out

    def __str__(self) -> str:
        return f"{self.s} {self.p} {self.o} ."


@dataclass
class BGP:
    patterns: list[TriplePattern]
    projection: list[str]
    select_all: bool = False

    def variables(self) -> list[str]:
        out: list[str] = []
        for t in self.patterns:
            for v in t.variables():
                if v not in out:
                    out.append(v)
        return out


_UNSUPPORTED = {
    "OPTIONAL", "FILTER", "UNION", "MINUS", "BIND", "VALUES", "SERVICE", "GRAPH",
    "DISTINCT", "REDUCED", "ORDER", "LIMIT", "OFFSET", "GROUP", "HAVING",
    "CONSTRUCT", "ASK", "DESCRIBE", "INSERT", "DELETE", "FROM",
}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<iri><[^<>"{}|^`\\\x00-\x20]*>)
  | (?P<literal>"(?:[^"\\\r\n]|\\.)*"(?:@[a-zA-Z]+(?:-[a-zA-Z0-9]+)*)?)
  | (?P<dtmark>\^\^)
  | (?P<var>[?$][A-Za-z_][A-Za-z0-9_]*)
  | (?P<bnode>_:[A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?)
  | (?P<pname>(?:[A-Za-z][\w\-]*(?:\.[\w\-]+)*)?:(?:[\w\-]+(?:\.[\w\-]+)*)?)
  | (?P<number>[+-]?\d+(?:\.\d+)?)
  | (?P<word>[A-Za-z]+)
  | (?P<punct>[{}.*;,()])
  | (?P<path>[/|^])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            # expression syntax (FILTER, BIND, ...) is not tokenizable; name the feature
            for t in toks:
                if t.kind == "word" and t.text.upper() in _UNSUPPORTED:
                    raise UnsupportedFeatureError(t.text.upper())
            raise QuerySyntaxError(pos, f"unexpected character {text[pos]!r}")
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.prefixes: dict[str, str] = {}

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def keyword(self, t: _Tok) -> str:
        return t.text.upper() if t.kind == "word" else ""

    def expect_word(self, word: str) -> None:
        t = self.next()
        if self.keyword(t) != word:
            self._unexpected(t, f"expected {word}")

    def expect_punct(self, ch: str) -> None:
        t = self.next()
        if t.kind != "punct" or t.text != ch:
            self._unexpected(t, f"expected {ch!r}")

    def _unexpected(self, t: _Tok, msg: str):
        kw = self.keyword(t)
        if kw in _UNSUPPORTED:
            raise UnsupportedFeatureError(kw)
        found = t.text or "end of input"
        raise QuerySyntaxError(t.pos, f"{msg}, found {found!r}")

    def parse(self) -> BGP:
        while self.keyword(self.peek()) in ("PREFIX", "BASE"):
            kw = self.keyword(self.next())
            if kw == "BASE":
                raise UnsupportedFeatureError("BASE")
            name = self.next()
            if name.kind != "pname" or not name.text.endswith(":"):
                self._unexpected(name, "expected prefix name")
            iri = self.next()
            if iri.kind != "iri":
                self._unexpected(iri, "expected IRI")
            self.prefixes[name.text[:-1]] = iri.text[1:-1]
        self.expect_word("SELECT")
        projection: list[str] = []
        select_all = False
        t = self.peek()
        if t.kind == "punct" and t.text == "*":
            self.next()
            select_all = True
        else:
            while self.peek().kind == "var":
                projection.append(self.next().text[1:])
            if not projection:
                self._unexpected(self.peek(), "expected projection variables or '*'")
        if self.keyword(self.peek()) == "WHERE":
            self.next()
        self.expect_punct("{")
        patterns = self._triples_block()
        self.expect_punct("}")
        tail = self.next()
        if tail.kind != "eof":
            self._unexpected(tail, "expected end of query")
        if not patterns:
            raise QuerySyntaxError(tail.pos, "empty graph pattern")
        bgp = BGP(patterns, projection, select_all)
        known = bgp.variables()
        if select_all:
            bgp.projection = known
        for v in projection:
            if v not in known:
                raise QuerySyntaxError(0, f"projected variable ?{v} does not occur in the pattern")
        return bgp

    def _triples_block(self) -> list[TriplePattern]:
        out: list[TriplePattern] = []
        while True:
            t = self.peek()
            if t.kind == "punct" and t.text == "}":
                return out
            if t.kind == "punct" and t.text == "{":
                raise UnsupportedFeatureError("nested group patterns")
            subj = self._node(self.next(), "subject")
            while True:
                pt = self.next()
                if pt.kind == "var":
                    raise UnsupportedFeatureError(f"unbound predicate {pt.text}")
                if pt.kind == "word" and pt.text == "a":
                    pred: Node = Constant(Term(TermKind.IRI, RDF_TYPE))
                else:
                    pred = self._node(pt, "predicate")
                    if not isinstance(pred, Constant) or pred.value.kind is not TermKind.IRI:
                        raise QuerySyntaxError(pt.pos, "predicate must be an IRI")
                if self.peek().kind == "path":
                    raise UnsupportedFeatureError("property paths")
                while True:
                    obj = self._node(self.next(), "object")
                    out.append(TriplePattern(subj, pred, obj))
                    if self.peek().kind == "punct" and self.peek().text == ",":
                        self.next()
                        continue
                    break
                if self.peek().kind == "punct" and self.peek().text == ";":
                    self.next()
                    nt = self.peek()
                    if nt.kind == "punct" and nt.text in ".}":
                        break
                    continue
                break
            t = self.peek()
            if t.kind == "punct" and t.text == ".":
                self.next()
            elif not (t.kind == "punct" and t.text == "}"):
                self._unexpected(t, "expected '.' or '}'")

    def _node(self, t: _Tok, role: str) -> Node:
        if t.kind == "var":
            return Variable(t.text[1:])
        if t.kind == "iri":
            return Constant(Term(TermKind.IRI, t.text[1:-1]))
        if t.kind == "pname":
            return Constant(Term(TermKind.IRI, self._expand(t)))
        if t.kind == "bnode":
            return Constant(Term(TermKind.BNODE, t.text[2:]))
        if t.kind in ("literal", "number"):
            if role != "object":
                raise QuerySyntaxError(t.pos, f"literal not allowed as {role}")
            return Constant(Term(TermKind.LITERAL, self._literal(t)))
        self._unexpected(t, f"expected {role}")

    def _expand(self, t: _Tok) -> str:
        prefix, _, local = t.text.partition(":")
        if prefix not in self.prefixes:
            raise QuerySyntaxError(t.pos, f"undeclared prefix {prefix!r}")
        return self.prefixes[prefix] + local

    def _literal(self, t: _Tok) -> str:
        if t.kind == "number":
            dt = "decimal" if "." in t.text else "integer"
            return f'"{t.text}"^^<{XSD}{dt}>'
        if self.peek().kind == "dtmark":
            self.next()
            dt = self.next()
            if dt.kind == "iri":
                return f"{t.text}^^{dt.text}"
            if dt.kind == "pname":
                return f"{t.text}^^<{self._expand(dt)}>"
            self._unexpected(dt, "expected datatype IRI")
        return t.text


def parse_query(text: str) -> BGP:
    """Parse ``SELECT vars|* WHERE { triple patterns }`` with optional PREFIXes."""
    return _Parser(text).parse()
