"""Immutable, indexed in-memory knowledge graph with loading and triple-pattern lookup.

Terms are interned to dense integer ids in first-seen file order; all result
orderings are lexicographic over those ids, so a given file always produces
byte-identical query output.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

IRI = "iri"
LITERAL = "literal"

DEFAULT_LABEL_PREDICATE = "type.object.name"

_TSV_ESCAPES = {'"': '"', "t": "\t", "n": "\n", "\\": "\\"}
_TSV_UNESCAPES = {"\t": "\\t", "\n": "\\n", '"': '\\"', "\\": "\\\\"}


class KbLoadError(ValueError):
    """A line of a KB file failed to parse.

    Carries the 1-based line number and the byte offset of the line start.
    """

    def __init__(self, message: str, line: int, offset: int):
        super().__init__(f"line {line} (byte {offset}): {message}")
        self.line = line
        self.offset = offset


@dataclass(frozen=True)
class Term:
    """A node of the graph: an IRI or a literal (optionally typed)."""

    kind: str
    value: str
    datatype: Optional[str] = None

    def __post_init__(self):
        if self.kind not in (IRI, LITERAL):
            raise ValueError(f"bad term kind: {self.kind!r}")
        if self.kind == IRI:
            if not self.value or any(c.isspace() for c in self.value):
                raise ValueError(f"bad IRI: {self.value!r}")
            if self.datatype is not None:
                raise ValueError("IRIs carry no datatype")

    @property
    def is_iri(self) -> bool:
        return self.kind == IRI


def iri(value: str) -> Term:
    return Term(IRI, value)


def literal(value: str, datatype: Optional[str] = None) -> Term:
    return Term(LITERAL, value, datatype)


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self):
        if not self.subject.is_iri:
            raise ValueError("triple subject must be an IRI")
        if not self.predicate.is_iri:
            raise ValueError("triple predicate must be an IRI")


class KnowledgeBase:
    """Read-only triple store with SPO/POS/OSP permutation indexes.

    Construct through :func:`load_kb` or :func:`from_triples`; instances are
    immutable after construction and safe to share across threads.
    """

    def __init__(self, triples: Iterable[Triple], label_predicate: str = DEFAULT_LABEL_PREDICATE):
        self._label_predicate = label_predicate
        self._terms: list[Term] = []
        self._ids: dict[Term, int] = {}
        spo = set()
        for t in triples:
            key = (self._intern(t.subject), self._intern(t.predicate), self._intern(t.object))
            spo.add(key)
        self._spo = sorted(spo)
        self._pos = sorted((p, o, s) for s, p, o in spo)
        self._osp = sorted((o, s, p) for s, p, o in spo)
        self._labels: dict[str, str] = {}
        label_id = self._ids.get(Term(IRI, label_predicate)) if label_predicate else None
        if label_id is not None:
            for p, o, s in self._iter_index(self._pos, (label_id,)):
                self._labels[self._terms[s].value] = self._terms[o].value

    def _intern(self, term: Term) -> int:
        tid = self._ids.get(term)
        if tid is None:
            tid = len(self._terms)
            self._ids[term] = tid
            self._terms.append(term)
        return tid

    @staticmethod
    def _iter_index(index: list, prefix: tuple) -> Iterator[tuple]:
        lo = bisect.bisect_left(index, prefix)
        hi = bisect.bisect_left(index, prefix[:-1] + (prefix[-1] + 1,)) if prefix else len(index)
        return iter(index[lo:hi])

    # -- read api ----------------------------------------------------------

    @property
    def label_predicate(self) -> str:
        return self._label_predicate

    @property
    def labels(self) -> dict[str, str]:
        return dict(self._labels)

    def __len__(self) -> int:
        return len(self._spo)

    def __eq__(self, other) -> bool:
        if not isinstance(other, KnowledgeBase):
            return NotImplemented
        return (
            set(self.triples()) == set(other.triples())
            and self._labels == other._labels
            and self._label_predicate == other._label_predicate
        )

    def index_sizes(self) -> tuple[int, int, int]:
        return len(self._spo), len(self._pos), len(self._osp)

    def term_id(self, term: Term) -> Optional[int]:
        """Dense intern id of a term, or None if the term never occurs."""
        return self._ids.get(term)

    def term_count(self) -> int:
        return len(self._terms)

    def triples(self) -> Iterator[Triple]:
        """All triples in ascending (s, p, o) id order."""
        for s, p, o in self._spo:
            yield Triple(self._terms[s], self._terms[p], self._terms[o])

    def contains(self, triple: Triple) -> bool:
        s = self._ids.get(triple.subject)
        p = self._ids.get(triple.predicate)
        o = self._ids.get(triple.object)
        if s is None or p is None or o is None:
            return False
        i = bisect.bisect_left(self._spo, (s, p, o))
        return i < len(self._spo) and self._spo[i] == (s, p, o)

    def label_of(self, term: Term) -> Optional[str]:
        """Display label of an IRI, or None when no label triple exists."""
        if not term.is_iri:
            raise ValueError("label_of expects an IRI term")
        return self._labels.get(term.value)

    def triples_matching(
        self,
        subject: Optional[Term] = None,
        predicate: Optional[Term] = None,
        object: Optional[Term] = None,
    ) -> list[Triple]:
        """Triples matching all ground positions, sorted by (s, p, o) intern ids."""
        ids = []
        for term in (subject, predicate, object):
            if term is None:
                ids.append(None)
            else:
                tid = self._ids.get(term)
                if tid is None:
                    return []
                ids.append(tid)
        s, p, o = ids
        if s is not None and p is not None:
            prefix = (s, p) if o is None else (s, p, o)
            matched = list(self._iter_index(self._spo, prefix))
        elif s is not None and o is not None:
            matched = [(s2, p2, o2) for o2, s2, p2 in self._iter_index(self._osp, (o, s))]
        elif s is not None:
            matched = list(self._iter_index(self._spo, (s,)))
        elif p is not None:
            prefix = (p,) if o is None else (p, o)
            matched = [(s2, p2, o2) for p2, o2, s2 in self._iter_index(self._pos, prefix)]
        elif o is not None:
            matched = [(s2, p2, o2) for o2, s2, p2 in self._iter_index(self._osp, (o,))]
        else:
            matched = list(self._spo)
        matched.sort()
        return [Triple(self._terms[a], self._terms[b], self._terms[c]) for a, b, c in matched]


def from_triples(triples: Iterable[Triple], label_predicate: str = DEFAULT_LABEL_PREDICATE) -> KnowledgeBase:
    return KnowledgeBase(triples, label_predicate)


# -- file formats ------------------------------------------------------------


def _parse_tsv_field(field: str, line: int, offset: int) -> Term:
    if not field.startswith('"'):
        if not field or any(c.isspace() for c in field):
            raise KbLoadError(f"bad IRI field {field!r}", line, offset)
        return Term(IRI, field)
    out = []
    i = 1
    while i < len(field):
        c = field[i]
        if c == "\\":
            if i + 1 >= len(field):
                raise KbLoadError("dangling escape in literal", line, offset)
            nxt = field[i + 1]
            out.append(_TSV_ESCAPES.get(nxt, "\\" + nxt))
            i += 2
        elif c == '"':
            rest = field[i + 1 :]
            datatype = None
            if rest.startswith("^^"):
                datatype = rest[2:]
                if not datatype:
                    raise KbLoadError("empty datatype suffix", line, offset)
            elif rest:
                raise KbLoadError(f"trailing content after literal: {rest!r}", line, offset)
            return Term(LITERAL, "".join(out), datatype)
        else:
            out.append(c)
            i += 1
    raise KbLoadError("unterminated literal", line, offset)


def _parse_tsv_line(text: str, line: int, offset: int) -> Triple:
    fields = text.split("\t")
    if len(fields) != 3:
        raise KbLoadError(f"expected 3 tab-separated fields, got {len(fields)}", line, offset)
    s, p, o = (_parse_tsv_field(f, line, offset) for f in fields)
    if not s.is_iri or not p.is_iri:
        raise KbLoadError("subject and predicate must be IRIs", line, offset)
    return Triple(s, p, o)


def _parse_nt_line(text: str, line: int, offset: int) -> Triple:
    rest = text.strip()
    if not rest.endswith("."):
        raise KbLoadError("missing terminating '.'", line, offset)
    rest = rest[:-1].strip()

    def take_iri(s: str) -> tuple[Term, str]:
        if not s.startswith("<"):
            raise KbLoadError(f"expected <iri>, got {s[:20]!r}", line, offset)
        end = s.find(">")
        if end < 0:
            raise KbLoadError("unterminated <iri>", line, offset)
        return Term(IRI, s[1:end]), s[end + 1 :].lstrip()

    def take_object(s: str) -> tuple[Term, str]:
        if s.startswith("<"):
            return take_iri(s)
        if not s.startswith('"'):
            raise KbLoadError(f"expected <iri> or literal, got {s[:20]!r}", line, offset)
        out = []
        i = 1
        while i < len(s):
            c = s[i]
            if c == "\\":
                if i + 1 >= len(s):
                    raise KbLoadError("dangling escape in literal", line, offset)
                out.append(_TSV_ESCAPES.get(s[i + 1], "\\" + s[i + 1]))
                i += 2
            elif c == '"':
                rest2 = s[i + 1 :].lstrip()
                datatype = None
                if rest2.startswith("^^"):
                    if not rest2[2:].startswith("<"):
                        raise KbLoadError("datatype must be wrapped in <>", line, offset)
                    dt_term, rest2 = take_iri(rest2[2:])
                    datatype = dt_term.value
                return Term(LITERAL, "".join(out), datatype), rest2
            else:
                out.append(c)
                i += 1
        raise KbLoadError("unterminated literal", line, offset)

    s_term, rest = take_iri(rest)
    p_term, rest = take_iri(rest)
    o_term, rest = take_object(rest)
    if rest.strip():
        raise KbLoadError(f"trailing content: {rest!r}", line, offset)
    return Triple(s_term, p_term, o_term)


def iter_file_triples(path: str | Path, format: str = "tsv") -> Iterator[Triple]:
    """Parse a KB file, yielding triples; raises KbLoadError on any bad line."""
    if format not in ("tsv", "ntriples"):
        raise ValueError(f"unknown KB format {format!r} (expected 'tsv' or 'ntriples')")
    parse = _parse_tsv_line if format == "tsv" else _parse_nt_line
    data = Path(path).read_bytes()
    offset = 0
    for line_no, raw in enumerate(data.split(b"\n"), start=1):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise KbLoadError(f"invalid UTF-8: {exc}", line_no, offset) from exc
        stripped = text.strip()
        if stripped and not stripped.startswith("#"):
            yield parse(text.rstrip("\r"), line_no, offset)
        offset += len(raw) + 1


def load_kb(
    path: str | Path,
    format: str = "tsv",
    label_predicate: str = DEFAULT_LABEL_PREDICATE,
) -> KnowledgeBase:
    """Load a KB file into a fully-indexed immutable store.

    Duplicate triples are silently collapsed; labels come from triples whose
    predicate equals ``label_predicate``.
    """
    return KnowledgeBase(iter_file_triples(path, format), label_predicate)


def write_tsv_field(term: Term) -> str:
    """Inverse of the TSV field parser, for fixture writers and round-trips."""
    if term.is_iri:
        return term.value
    escaped = "".join(_TSV_UNESCAPES.get(c, c) for c in term.value)
    suffix = f"^^{term.datatype}" if term.datatype else ""
    return f'"{escaped}"{suffix}'


def write_tsv(kb: KnowledgeBase, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in kb.triples():
            fh.write(f"{write_tsv_field(t.subject)}\t{write_tsv_field(t.predicate)}\t{write_tsv_field(t.object)}\n")
