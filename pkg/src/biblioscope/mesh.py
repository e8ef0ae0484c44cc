"""MeSH-style thesaurus and a small PubMed-like query language.

Queries combine quoted descriptors with field tags and a publication-date
range, e.g.::

    ("Infections"[MH] OR "Travel-Related Illness"[Mesh:NoExp])
        AND 2000/01/01:2020/12/01[dp]

``[MH]`` explodes a descriptor to all its descendants in the tree,
``[Mesh:NoExp]`` matches the descriptor alone and ``[MAJR]`` explodes but
only counts headings flagged as major topics.
"""
from __future__ import annotations

import bisect
import datetime as dt
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

from .records import BibRecord

logger = logging.getLogger(__name__)

TREE_NUMBER_RE = re.compile(r"[A-Z][0-9]+(\.[0-9]+)*")
MAX_DEPTH = 13


class ThesaurusError(ValueError):
    pass


class UnknownDescriptorError(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unknown descriptor: {self.name!r}"


@dataclass
class MeshDescriptor:
    name: str
    tree_numbers: set[str] = field(default_factory=set)


def tree_depth(tree_number: str) -> int:
    return tree_number.count(".") + 1


def parent_tree_number(tree_number: str) -> str | None:
    head, sep, _ = tree_number.rpartition(".")
    return head if sep else None


class MeshThesaurus:
    """Immutable descriptor forest indexed by tree number."""

    def __init__(self, pairs: Iterable[tuple[str, str]], max_depth: int | None = MAX_DEPTH):
        self.descriptors: dict[str, MeshDescriptor] = {}
        self.index: dict[str, str] = {}
        for name, tn in pairs:
            if not TREE_NUMBER_RE.fullmatch(tn):
                raise ThesaurusError(f"malformed tree number {tn!r} for {name!r}")
            if max_depth is not None and tree_depth(tn) > max_depth:
                raise ThesaurusError(f"tree number {tn!r} deeper than {max_depth} levels")
            owner = self.index.get(tn)
            if owner is not None and owner != name:
                raise ThesaurusError(f"tree number {tn!r} assigned to {owner!r} and {name!r}")
            self.descriptors.setdefault(name, MeshDescriptor(name)).tree_numbers.add(tn)
            self.index[tn] = name
        self._sorted = sorted(self.index)
        self._explode_cache: dict[str, frozenset[str]] = {}

    def __contains__(self, name: str) -> bool:
        return name in self.descriptors

    def __len__(self) -> int:
        return len(self.descriptors)

    def descendant_tree_numbers(self, tree_number: str) -> list[str]:
        # all strict descendants share the prefix "tn." and sort contiguously
        prefix = tree_number + "."
        lo = bisect.bisect_left(self._sorted, prefix)
        hi = bisect.bisect_left(self._sorted, tree_number + "/")
        return self._sorted[lo:hi]

    def parents(self, name: str) -> set[str]:
        """Names of the nearest ancestors present in the thesaurus."""
        out = set()
        for tn in self._descriptor(name).tree_numbers:
            parent = parent_tree_number(tn)
            while parent is not None and parent not in self.index:
                parent = parent_tree_number(parent)
            if parent is not None:
                out.add(self.index[parent])
        return out

    def explode(self, name: str) -> frozenset[str]:
        cached = self._explode_cache.get(name)
        if cached is not None:
            return cached
        out = {name}
        for tn in self._descriptor(name).tree_numbers:
            out.update(self.index[d] for d in self.descendant_tree_numbers(tn))
        result = frozenset(out)
        self._explode_cache[name] = result
        return result

    def _descriptor(self, name: str) -> MeshDescriptor:
        try:
            return self.descriptors[name]
        except KeyError:
            raise UnknownDescriptorError(name) from None


def load_thesaurus(path: str | Path, max_depth: int | None = MAX_DEPTH) -> MeshThesaurus:
    """Load a two-column ``name<TAB>tree_number`` file."""
    pairs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ThesaurusError(f"{path}:{lineno}: expected 2 tab-separated columns")
            name, tn = parts[0].strip(), parts[1].strip()
            if not TREE_NUMBER_RE.fullmatch(tn):
                raise ThesaurusError(f"{path}:{lineno}: malformed tree number {tn!r}")
            if (name, tn) in seen:
                logger.warning("%s:%d: duplicate pair (%s, %s) ignored", path, lineno, name, tn)
                continue
            seen.add((name, tn))
            pairs.append((name, tn))
    return MeshThesaurus(pairs, max_depth=max_depth)


def explode(thesaurus: MeshThesaurus, name: str) -> frozenset[str]:
    return thesaurus.explode(name)


# -- query AST ---------------------------------------------------------------

@dataclass(frozen=True)
class TermClause:
    descriptor: str
    explode: bool = True
    major_only: bool = False


@dataclass(frozen=True)
class DateRange:
    start: dt.date
    end: dt.date


@dataclass(frozen=True)
class And:
    children: tuple["QueryExpr", ...]


@dataclass(frozen=True)
class Or:
    children: tuple["QueryExpr", ...]


QueryExpr = Union[TermClause, DateRange, And, Or]


class QuerySyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


_TAGS = {
    "mh": (True, False),
    "mesh": (True, False),
    "mesh terms": (True, False),
    "mesh:noexp": (False, False),
    "mh:noexp": (False, False),
    "majr": (True, True),
}

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<quote>")
  | (?P<date>\d{4}/\d{2}/\d{2}:\d{4}/\d{2}/\d{2}\[[^\]]*\])
  | (?P<word>[A-Za-z]+)
""", re.VERBOSE)


@dataclass
class _Token:
    kind: str
    value: object
    pos: int


def _parse_date(text: str, pos: int) -> dt.date:
    try:
        return dt.datetime.strptime(text, "%Y/%m/%d").date()
    except ValueError:
        raise QuerySyntaxError(f"malformed date {text!r}", pos) from None


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos] == '"':
            end = text.find('"', pos + 1)
            if end < 0:
                raise QuerySyntaxError("unbalanced quote", pos)
            name = text[pos + 1:end]
            if not name.strip():
                raise QuerySyntaxError("empty descriptor", pos)
            if end + 1 >= len(text) or text[end + 1] != "[":
                raise QuerySyntaxError("descriptor without field tag", end + 1)
            close = text.find("]", end + 1)
            if close < 0:
                raise QuerySyntaxError("unterminated field tag", end + 1)
            tag = text[end + 2:close].strip().lower()
            if tag not in _TAGS:
                raise QuerySyntaxError(f"unknown field tag [{text[end + 2:close]}]", end + 1)
            exp, major = _TAGS[tag]
            tokens.append(_Token("term", TermClause(name, exp, major), pos))
            pos = close + 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind == "date":
            raw = m.group()
            span, tag = raw[:-1].split("[", 1)
            if tag.strip().lower() not in ("dp", "pdat"):
                raise QuerySyntaxError(f"unknown field tag [{tag}]", pos + len(span))
            a, b = span.split(":")
            start, end_ = _parse_date(a, pos), _parse_date(b, pos + len(a) + 1)
            if start > end_:
                raise QuerySyntaxError("date range ends before it starts", pos)
            tokens.append(_Token("date", DateRange(start, end_), pos))
        elif kind == "word":
            word = m.group().upper()
            if word not in ("AND", "OR"):
                raise QuerySyntaxError(f"unexpected word {m.group()!r}", pos)
            tokens.append(_Token(word.lower(), word, pos))
        elif kind in ("lparen", "rparen"):
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("eof", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def take(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def parse_or(self) -> QueryExpr:
        items = [self.parse_and()]
        while self.peek().kind == "or":
            self.take()
            items.append(self.parse_and())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def parse_and(self) -> QueryExpr:
        items = [self.parse_atom()]
        while self.peek().kind == "and":
            self.take()
            items.append(self.parse_atom())
        return items[0] if len(items) == 1 else And(tuple(items))

    def parse_atom(self) -> QueryExpr:
        tok = self.take()
        if tok.kind in ("term", "date"):
            return tok.value
        if tok.kind == "lparen":
            inner = self.parse_or()
            close = self.take()
            if close.kind != "rparen":
                raise QuerySyntaxError("unbalanced parenthesis", close.pos)
            return inner
        if tok.kind == "eof":
            raise QuerySyntaxError("unexpected end of query", tok.pos)
        raise QuerySyntaxError(f"unexpected {tok.value!r}", tok.pos)


def parse_query(text: str) -> QueryExpr:
    """Parse a query string; AND binds tighter than OR."""
    if not text.strip():
        raise QuerySyntaxError("empty query", 0)
    parser = _Parser(_tokenize(text))
    expr = parser.parse_or()
    tok = parser.peek()
    if tok.kind != "eof":
        if tok.kind == "rparen":
            raise QuerySyntaxError("unbalanced parenthesis", tok.pos)
        raise QuerySyntaxError(f"unexpected {tok.value!r}", tok.pos)
    return expr


def format_query(expr: QueryExpr) -> str:
    """Render ``expr`` back into query syntax (parenthesizing nested groups)."""
    if isinstance(expr, TermClause):
        if expr.major_only:
            tag = "MAJR"
        else:
            tag = "MH" if expr.explode else "Mesh:NoExp"
        return f'"{expr.descriptor}"[{tag}]'
    if isinstance(expr, DateRange):
        return f"{expr.start:%Y/%m/%d}:{expr.end:%Y/%m/%d}[dp]"
    op = " AND " if isinstance(expr, And) else " OR "
    parts = []
    for child in expr.children:
        text = format_query(child)
        if isinstance(child, (And, Or)):
            text = f"({text})"
        parts.append(text)
    return op.join(parts)


def iter_terms(expr: QueryExpr) -> Iterable[TermClause]:
    if isinstance(expr, TermClause):
        yield expr
    elif isinstance(expr, (And, Or)):
        for child in expr.children:
            yield from iter_terms(child)


def validate_query(expr: QueryExpr, thesaurus: MeshThesaurus) -> None:
    for term in iter_terms(expr):
        if term.descriptor not in thesaurus:
            raise UnknownDescriptorError(term.descriptor)


def _term_matches(record: BibRecord, term: TermClause, thesaurus: MeshThesaurus) -> bool:
    targets = thesaurus.explode(term.descriptor) if term.explode else {term.descriptor}
    return any(h.descriptor in targets and (h.major or not term.major_only)
               for h in record.mesh_terms)


def eval_query(record: BibRecord, expr: QueryExpr, thesaurus: MeshThesaurus) -> bool:
    if isinstance(expr, TermClause):
        return _term_matches(record, expr, thesaurus)
    if isinstance(expr, DateRange):
        # records only carry a year, so the range is compared at year granularity
        return expr.start.year <= record.year <= expr.end.year
    if isinstance(expr, And):
        return all(eval_query(record, c, thesaurus) for c in expr.children)
    if isinstance(expr, Or):
        return any(eval_query(record, c, thesaurus) for c in expr.children)
    raise TypeError(f"not a query node: {expr!r}")


def run_query(corpus: Iterable[BibRecord], expr: QueryExpr,
              thesaurus: MeshThesaurus) -> list[BibRecord]:
    validate_query(expr, thesaurus)
    return [r for r in corpus if eval_query(r, expr, thesaurus)]


def explain(record: BibRecord, expr: QueryExpr, thesaurus: MeshThesaurus,
            depth: int = 0) -> list[str]:
    """Indented per-clause evaluation trace, one line per AST node."""
    value = eval_query(record, expr, thesaurus)
    pad = "  " * depth
    if isinstance(expr, (And, Or)):
        lines = [f"{pad}{type(expr).__name__.upper()} -> {value}"]
        for child in expr.children:
            lines.extend(explain(record, child, thesaurus, depth + 1))
        return lines
    return [f"{pad}{format_query(expr)} -> {value}"]


INFECTIOUS_DISEASES_QUERY = (
    '("Infections"[MH] OR "Bacterial Vaccines"[MH] OR "Fungal Vaccines"[MH] OR '
    '"Protozoan Vaccines"[MH] OR "Toxoids"[MH] OR "Viral Vaccines"[MH] OR '
    '"Disease Notification"[MH] OR "Disease Eradication"[MH] OR '
    '"Disease Transmission, Infectious"[MH] OR "Contact Tracing"[MH] OR '
    '"Carrier State"[MH] OR "Chain of Infection"[MH] OR "Disease Outbreaks"[MH] OR '
    '"Travel-Related Illness"[Mesh:NoExp] OR "Quarantine"[MH] OR "Reinfection"[MH]) '
    'AND 2000/01/01:2020/12/01[dp]'
)
