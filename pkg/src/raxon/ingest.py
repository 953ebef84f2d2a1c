"""N-Triples parsing, term dictionary and dataset statistics."""
from __future__ import annotations

import enum
import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, NamedTuple, Optional, Union

import numpy as np

from .errors import NTriplesError

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"


class TermKind(str, enum.Enum):
    IRI = "iri"
    LITERAL = "literal"
    BNODE = "bnode"


class Term(NamedTuple):
    """An RDF term.

    ``lexical`` is the IRI text without brackets, the blank node label without
    ``_:``, or the complete literal token (quotes, escapes, language tag or
    datatype kept verbatim).
    """

    kind: TermKind
    lexical: str

    @classmethod
    def iri(cls, value: str) -> "Term":
        return cls(TermKind.IRI, value)

    @classmethod
    def bnode(cls, label: str) -> "Term":
        return cls(TermKind.BNODE, label)

    @classmethod
    def literal(cls, token: str) -> "Term":
        return cls(TermKind.LITERAL, token)

    def to_ntriples(self) -> str:
        if self.kind is TermKind.IRI:
            return f"<{self.lexical}>"
        if self.kind is TermKind.BNODE:
            return f"_:{self.lexical}"
        return self.lexical


class TermDictionary:
    """Bijection between terms and dense ids assigned in first-seen order."""

    def __init__(self, terms: Iterable[Term] = ()):
        self._terms: list[Term] = []
        self._ids: dict[Term, int] = {}
        for t in terms:
            self.encode(t)

    def encode(self, term: Term) -> int:
        tid = self._ids.get(term)
        if tid is None:
            tid = len(self._terms)
            self._ids[term] = tid
            self._terms.append(term)
        return tid

    def lookup(self, term: Term) -> Optional[int]:
        return self._ids.get(term)

    def decode(self, tid: int) -> Term:
        return self._terms[tid]

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, TermDictionary) and self._terms == other._terms


_IRI = r"<(?:[^<>\"{}|^`\\\x00-\x20]|\\u[0-9A-Fa-f]{4}|\\U[0-9A-Fa-f]{8})*>"
_BNODE = r"_:[A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?"
_LITERAL = r"\"(?:[^\"\\\r\n]|\\.)*\"(?:@[a-zA-Z]+(?:-[a-zA-Z0-9]+)*|\^\^" + _IRI + ")?"

_LINE = re.compile(
    rf"(?P<s>{_IRI}|{_BNODE})[ \t]*(?P<p>{_IRI})[ \t]*(?P<o>{_IRI}|{_BNODE}|{_LITERAL})[ \t]*\.[ \t]*(?:#.*)?"
)


def _term(token: str) -> Term:
    if token[0] == "<":
        return Term(TermKind.IRI, token[1:-1])
    if token[0] == "_":
        return Term(TermKind.BNODE, token[2:])
    return Term(TermKind.LITERAL, token)


def parse_term(token: str) -> Term:
    """Parse a single N-Triples term token."""
    if not re.fullmatch(f"{_IRI}|{_BNODE}|{_LITERAL}", token):
        raise ValueError(f"not an N-Triples term: {token!r}")
    return _term(token)


@dataclass
class ParseResult:
    triples: np.ndarray  # (n, 3) int64: subject, predicate, object ids
    dictionary: TermDictionary
    skipped: int = 0
    lines: int = 0


def _lines(source) -> Iterable[bytes]:
    if isinstance(source, (bytes, bytearray)):
        return io.BytesIO(source)
    if isinstance(source, (str, Path)):
        return open(source, "rb")
    return source


def parse_ntriples(
    source: Union[BinaryIO, bytes, str, Path],
    strict: bool = False,
    dictionary: Optional[TermDictionary] = None,
) -> ParseResult:
    """Parse line-oriented N-Triples into dictionary-encoded triples.

    Blank and comment-only lines are ignored.  With ``strict`` the first
    malformed line raises :class:`NTriplesError`; otherwise it is counted in
    ``skipped``.  Duplicate triples are kept.
    """
    dictionary = dictionary if dictionary is not None else TermDictionary()
    encode = dictionary.encode
    flat: list[int] = []
    skipped = 0
    line_no = 0
    stream = _lines(source)
    try:
        for line_no, raw in enumerate(stream, start=1):
            try:
                line = raw.decode("utf-8").strip() if isinstance(raw, bytes) else raw.strip()
            except UnicodeDecodeError:
                if strict:
                    raise NTriplesError(line_no, "invalid UTF-8")
                skipped += 1
                continue
            if not line or line[0] == "#":
                continue
            m = _LINE.fullmatch(line)
            if m is None:
                if strict:
                    raise NTriplesError(line_no, f"malformed triple: {line[:80]!r}")
                skipped += 1
                continue
            flat.append(encode(_term(m.group("s"))))
            flat.append(encode(_term(m.group("p"))))
            flat.append(encode(_term(m.group("o"))))
    finally:
        if isinstance(source, (str, Path)):
            stream.close()
    triples = np.asarray(flat, dtype=np.int64).reshape(-1, 3)
    return ParseResult(triples, dictionary, skipped, line_no)


def dedupe_triples(triples) -> np.ndarray:
    """Distinct triples in first-seen order."""
    arr = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if len(arr) == 0:
        return arr
    _, first = np.unique(arr, axis=0, return_index=True)
    return arr[np.sort(first)]


@dataclass
class DatasetStats:
    total_triples: int = 0
    distinct_subjects: int = 0
    property_card: dict[int, int] = field(default_factory=dict)
    class_card: dict[int, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "total_triples": self.total_triples,
            "distinct_subjects": self.distinct_subjects,
            "property_card": sorted(self.property_card.items()),
            "class_card": sorted(self.class_card.items()),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DatasetStats":
        return cls(
            obj["total_triples"],
            obj["distinct_subjects"],
            {int(k): int(v) for k, v in obj["property_card"]},
            {int(k): int(v) for k, v in obj["class_card"]},
        )


def collect_stats(triples, type_id: Optional[int] = None) -> DatasetStats:
    """Cardinality statistics over the distinct triples of a dataset.

    ``class_card`` counts distinct subjects per class and is only filled from
    triples whose predicate is ``type_id``.
    """
    arr = dedupe_triples(triples)
    if len(arr) == 0:
        return DatasetStats()
    preds, pcounts = np.unique(arr[:, 1], return_counts=True)
    class_card: dict[int, int] = {}
    if type_id is not None:
        typed = arr[arr[:, 1] == type_id]
        if len(typed):
            classes, ccounts = np.unique(typed[:, 2], return_counts=True)
            class_card = dict(zip(classes.tolist(), ccounts.tolist()))
    return DatasetStats(
        total_triples=len(arr),
        distinct_subjects=len(np.unique(arr[:, 0])),
        property_card=dict(zip(preds.tolist(), pcounts.tolist())),
        class_card=class_card,
    )
