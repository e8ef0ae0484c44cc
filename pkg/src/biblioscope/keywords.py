"""Author-keyword normalization and the Covid keyword sub-corpus.

Normalization is two-pass. The first pass folds each raw keyword to a
canonical spelling (lowercase, accents removed, hyphens and runs of
whitespace collapsed to one space, surrounding punctuation stripped). The
second pass merges a plural onto its singular when the singular also occurs
in the corpus vocabulary.
"""
from __future__ import annotations

import dataclasses
import re
import unicodedata
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .records import BibRecord

COVID_CANONICAL_TERMS = frozenset({
    "2019 ncov", "coronavirus", "covid", "sars cov 2",
    "wuhan seafood market pneumonia virus", "sars cov2",
})
MIN_STEM_LENGTH = 4
PLURAL_SUFFIXES = ("s", "es")

_SEPARATORS = re.compile(r"[\s\-‐‑‒–—−]+")


@dataclass(frozen=True)
class KeywordToken:
    raw: str
    canon: str


def _is_word_char(ch: str, keep: str) -> bool:
    return ch.isalnum() or ch in keep


def fold_keyword(raw: str, keep: str = "") -> str | None:
    """First-pass canonical spelling, or None for junk such as ``"***"``.

    Characters in ``keep`` survive the edge stripping (used for ``%``
    wildcards in patterns).
    """
    text = unicodedata.normalize("NFKD", raw)
    text = "".join(ch for ch in text if not unicodedata.combining(ch)).lower()
    text = _SEPARATORS.sub(" ", text).strip()
    start, end = 0, len(text)
    while start < end and not _is_word_char(text[start], keep):
        start += 1
    while end > start and not _is_word_char(text[end - 1], keep):
        end -= 1
    text = text[start:end].strip()
    if not any(ch.isalnum() for ch in text):
        return None
    return text


def merge_plural(canon: str, vocabulary: set[str] | frozenset[str]) -> str:
    """Strip a trailing "s"/"es" while the shorter form is in ``vocabulary``."""
    while True:
        for suffix in PLURAL_SUFFIXES:
            stem = canon[: -len(suffix)]
            if (canon.endswith(suffix) and len(stem) >= MIN_STEM_LENGTH
                    and stem in vocabulary):
                canon = stem
                break
        else:
            return canon


def normalize_keyword(raw: str, vocabulary: Iterable[str] | None = None) -> KeywordToken | None:
    canon = fold_keyword(raw)
    if canon is None:
        return None
    if vocabulary is not None:
        canon = merge_plural(canon, vocabulary if isinstance(vocabulary, (set, frozenset))
                             else set(vocabulary))
    return KeywordToken(raw, canon)


class KeywordNormalizer(TransformerMixin, BaseEstimator):
    """Map raw keyword lists to canonical, de-duplicated lists.

    ``fit`` collects the first-pass vocabulary over all documents;
    ``transform`` rewrites each document's keywords using it.

    Parameters
    ----------
    merge_plurals : bool, default=True
        Merge "vaccines" onto "vaccine" when both are in the vocabulary.
    """

    def __init__(self, merge_plurals: bool = True):
        self.merge_plurals = merge_plurals

    def fit(self, X: Iterable[Sequence[str]], y=None):
        vocab = set()
        for doc in X:
            for raw in doc:
                canon = fold_keyword(raw)
                if canon is not None:
                    vocab.add(canon)
        self.vocabulary_ = frozenset(vocab)
        self._cache: dict[str, str | None] = {}
        return self

    def canonical(self, raw: str) -> str | None:
        check_is_fitted(self, "vocabulary_")
        cache = self.__dict__.setdefault("_cache", {})
        if raw not in cache:
            canon = fold_keyword(raw)
            if canon is not None and self.merge_plurals:
                canon = merge_plural(canon, self.vocabulary_)
            cache[raw] = canon
        return cache[raw]

    def transform(self, X: Iterable[Sequence[str]]) -> list[list[str]]:
        out = []
        for doc in X:
            canons = (self.canonical(raw) for raw in doc)
            out.append(list(dict.fromkeys(c for c in canons if c is not None)))
        return out


def clean_corpus(records: Sequence[BibRecord],
                 normalizer: KeywordNormalizer | None = None) -> tuple[list[BibRecord], int]:
    """Rewrite keywords to canonical form and drop records left with none.

    Returns ``(kept, removed)`` with ``len(kept) + removed == len(records)``.
    """
    if normalizer is None:
        normalizer = KeywordNormalizer().fit(r.author_keywords for r in records)
    kept = []
    for record, canons in zip(records, normalizer.transform(r.author_keywords for r in records)):
        if not canons:
            continue
        canons = tuple(canons)
        if canons != record.author_keywords:
            record = dataclasses.replace(record, author_keywords=canons)
        kept.append(record)
    return kept, len(records) - len(kept)


# -- Covid pattern map -----------------------------------------------------------

class PatternMapError(ValueError):
    pass


def like_to_regex(pattern: str) -> re.Pattern:
    """SQL-LIKE pattern where ``%`` matches any (possibly empty) sequence."""
    return re.compile(".*".join(re.escape(part) for part in pattern.split("%")), re.DOTALL)


@dataclass(frozen=True)
class PatternRule:
    pattern: str
    canonical: str
    regex: re.Pattern

    def matches(self, canon: str) -> bool:
        return self.regex.fullmatch(canon) is not None


class PatternMap:
    """Ordered keyword patterns, each mapped to a canonical term.

    Patterns and canonical terms go through the same first-pass folding as
    keywords, so matching is case-insensitive. The first matching rule wins.
    """

    def __init__(self, rows: Iterable[tuple[str, str]],
                 allowed: Iterable[str] | None = None):
        rules = []
        seen = set()
        allowed = None if allowed is None else frozenset(allowed)
        for pattern, canonical in rows:
            folded = fold_keyword(pattern, keep="%")
            canon = fold_keyword(canonical)
            if folded is None or canon is None:
                raise PatternMapError(f"empty pattern or canonical term: {pattern!r}")
            if folded in seen:
                raise PatternMapError(f"duplicate pattern {pattern!r}")
            if allowed is not None and canon not in allowed:
                raise PatternMapError(f"canonical term {canon!r} not in the allowed set")
            seen.add(folded)
            rules.append(PatternRule(folded, canon, like_to_regex(folded)))
        if not rules:
            raise PatternMapError("pattern map is empty")
        self.rules = rules

    def __len__(self) -> int:
        return len(self.rules)

    @property
    def canonical_terms(self) -> frozenset[str]:
        return frozenset(r.canonical for r in self.rules)

    def lookup(self, keyword: str) -> str | None:
        canon = fold_keyword(keyword)
        if canon is None:
            return None
        for rule in self.rules:
            if rule.matches(canon):
                return rule.canonical
        return None


def load_pattern_map(path: str | Path | None = None,
                     allowed: Iterable[str] | None = None) -> PatternMap:
    """Read a ``pattern<TAB>canonical`` file; None loads the bundled Covid list."""
    if path is None:
        text = resources.files("biblioscope").joinpath("data/covid_keywords.tsv").read_text("utf-8")
        allowed = COVID_CANONICAL_TERMS if allowed is None else allowed
    else:
        text = Path(path).read_text(encoding="utf-8")
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise PatternMapError(f"line {lineno}: expected 2 tab-separated columns")
        rows.append((parts[0], parts[1]))
    return PatternMap(rows, allowed=allowed)


def covid_filter(records: Iterable[BibRecord], pattern_map: PatternMap,
                 years: tuple[int, int] = (2019, 2020)) -> list[BibRecord]:
    """Records published in ``years`` (inclusive) with a keyword matching the map.

    Matching keywords are rewritten to their canonical term in the output.
    """
    if pattern_map is None or len(pattern_map) == 0:
        raise PatternMapError("pattern map is empty")
    first, last = years
    out = []
    for record in records:
        if not first <= record.year <= last:
            continue
        rewritten, hit = [], False
        for kw in record.author_keywords:
            canonical = pattern_map.lookup(kw)
            if canonical is not None:
                hit = True
                rewritten.append(canonical)
            else:
                rewritten.append(kw)
        if hit:
            out.append(dataclasses.replace(
                record, author_keywords=tuple(dict.fromkeys(rewritten))))
    return out
