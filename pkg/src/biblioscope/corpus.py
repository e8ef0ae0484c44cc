"""Cross-source linkage, category union, analysis filters and the counts ledger.

Source A is the thesaurus-indexed stream (query hits), source B the citation
index. Records are paired in three exact tiers (pmid, then doi, then
normalized title with identical year). A key shared by more than one record
on either side is ambiguous, and every record involved stays unmatched.
"""
from __future__ import annotations

import dataclasses
import enum
import json
import math
import re
import unicodedata
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .records import BibRecord, DocType

ANALYSIS_DOC_TYPES = frozenset({DocType.ARTICLE, DocType.PROCEEDINGS_PAPER,
                                DocType.REVIEW, DocType.LETTER})
DEFAULT_CATEGORIES = frozenset({"INFECTIOUS DISEASES", "TROPICAL MEDICINE"})


class MatchTier(str, enum.Enum):
    PMID = "pmid"
    DOI = "doi"
    TITLE = "title"
    NONE = "none"


class LedgerError(AssertionError):
    """A ledger identity failed; this is a pipeline bug, not bad input."""


@dataclass(frozen=True)
class Provenance:
    in_source_a: bool
    in_source_b: bool
    matched_by: MatchTier = MatchTier.NONE


@dataclass
class CountsLedger:
    query_hits_A: int = 0
    a_duplicates: int = 0
    b_records: int = 0
    b_duplicates: int = 0
    matched_AB: int = 0
    matched_by_pmid: int = 0
    matched_by_doi: int = 0
    matched_by_title: int = 0
    ambiguous_A: int = 0
    ambiguous_B: int = 0
    A_only: int = 0
    A_in_categories: int = 0
    B_category_hits: int = 0
    B_only: int = 0
    union_total: int = 0
    in_source_B: int = 0
    after_filters: int | None = None

    def check(self) -> None:
        problems = []
        if self.matched_AB + self.A_only != self.query_hits_A:
            problems.append("matched_AB + A_only != query_hits_A")
        if self.matched_by_pmid + self.matched_by_doi + self.matched_by_title != self.matched_AB:
            problems.append("tier counts do not sum to matched_AB")
        if self.union_total != self.matched_AB + self.A_only + self.B_only:
            problems.append("union_total != matched_AB + A_only + B_only")
        if self.in_source_B != self.matched_AB + self.B_only:
            problems.append("in_source_B != matched_AB + B_only")
        if self.union_total > self.query_hits_A + self.b_records:
            problems.append("union_total exceeds combined source size")
        if self.A_in_categories > self.matched_AB:
            problems.append("A_in_categories > matched_AB")
        if self.after_filters is not None and self.after_filters > self.in_source_B:
            problems.append("after_filters > in_source_B")
        if problems:
            raise LedgerError("; ".join(problems))

    def as_dict(self) -> dict[str, int | None]:
        return dataclasses.asdict(self)


@dataclass
class LinkedCorpus:
    records: list[BibRecord]
    provenance: list[Provenance]
    ledger: CountsLedger = field(default_factory=CountsLedger)

    def __len__(self) -> int:
        return len(self.records)

    def __post_init__(self):
        if len(self.records) != len(self.provenance):
            raise ValueError("records and provenance differ in length")


_NON_ALNUM = re.compile(r"[^0-9a-z]+")


def normalize_title(title: str) -> str:
    text = unicodedata.normalize("NFKD", title)
    text = "".join(ch for ch in text if not unicodedata.combining(ch)).casefold()
    return _NON_ALNUM.sub(" ", text).strip()


def _title_key(r: BibRecord):
    t = normalize_title(r.title)
    return (t, r.year) if t else None


MATCH_KEYS: list[tuple[MatchTier, Callable[[BibRecord], object]]] = [
    (MatchTier.PMID, lambda r: r.pmid),
    (MatchTier.DOI, lambda r: r.doi),
    (MatchTier.TITLE, _title_key),
]


def _dedupe(records: Iterable[BibRecord], keys: Sequence[Callable[[BibRecord], object]]):
    """Keep the first record for each identifier value; return (kept, n_dropped)."""
    seen: list[set] = [set() for _ in keys]
    kept, dropped = [], 0
    for r in records:
        vals = [k(r) for k in keys]
        if any(v is not None and v in s for v, s in zip(vals, seen)):
            dropped += 1
            continue
        for v, s in zip(vals, seen):
            if v is not None:
                s.add(v)
        kept.append(r)
    return kept, dropped


def match_pairs(a: Sequence[BibRecord], b: Sequence[BibRecord]):
    """Tiered exact matching.

    Returns ``(pairs, ambiguous_a, ambiguous_b)`` where ``pairs`` maps
    A-index to (B-index, tier). Ambiguous records are withdrawn from all
    later tiers.
    """
    open_a = list(range(len(a)))
    open_b = list(range(len(b)))
    pairs: dict[int, tuple[int, MatchTier]] = {}
    amb_a: set[int] = set()
    amb_b: set[int] = set()
    for tier, keyfn in MATCH_KEYS:
        groups_a: dict[object, list[int]] = defaultdict(list)
        groups_b: dict[object, list[int]] = defaultdict(list)
        for i in open_a:
            k = keyfn(a[i])
            if k is not None:
                groups_a[k].append(i)
        for j in open_b:
            k = keyfn(b[j])
            if k is not None:
                groups_b[k].append(j)
        closed_a, closed_b = set(), set()
        for k, ia in groups_a.items():
            jb = groups_b.get(k)
            if not jb:
                continue
            if len(ia) == 1 and len(jb) == 1:
                pairs[ia[0]] = (jb[0], tier)
            else:
                amb_a.update(ia)
                amb_b.update(jb)
            closed_a.update(ia)
            closed_b.update(jb)
        open_a = [i for i in open_a if i not in closed_a]
        open_b = [j for j in open_b if j not in closed_b]
    return pairs, amb_a, amb_b


def merge_records(a: BibRecord, b: BibRecord) -> BibRecord:
    """B supplies bibliographic and citation data, A supplies the thesaurus terms."""
    keywords = list(dict.fromkeys(b.author_keywords + a.author_keywords))
    return dataclasses.replace(
        b,
        pmid=b.pmid if b.pmid is not None else a.pmid,
        doi=b.doi if b.doi is not None else a.doi,
        countries=a.countries | b.countries,
        mesh_terms=a.mesh_terms,
        author_keywords=tuple(keywords),
        retracted=a.retracted or b.retracted,
        source=None,
    )


def link(a_records: Sequence[BibRecord], b_records: Sequence[BibRecord]) -> LinkedCorpus:
    a, a_dup = _dedupe(a_records, [lambda r: r.pmid])
    b, b_dup = _dedupe(b_records, [lambda r: r.wos_id, lambda r: r.pmid])
    pairs, amb_a, amb_b = match_pairs(a, b)

    records, provenance = [], []
    tier_counts = defaultdict(int)
    for i, ra in enumerate(a):
        if i in pairs:
            j, tier = pairs[i]
            records.append(merge_records(ra, b[j]))
            provenance.append(Provenance(True, True, tier))
            tier_counts[tier] += 1
        else:
            records.append(dataclasses.replace(ra, source=None))
            provenance.append(Provenance(True, False))

    ledger = CountsLedger(
        query_hits_A=len(a), a_duplicates=a_dup, b_records=len(b), b_duplicates=b_dup,
        matched_AB=len(pairs),
        matched_by_pmid=tier_counts[MatchTier.PMID],
        matched_by_doi=tier_counts[MatchTier.DOI],
        matched_by_title=tier_counts[MatchTier.TITLE],
        ambiguous_A=len(amb_a), ambiguous_B=len(amb_b),
        A_only=len(a) - len(pairs),
    )
    ledger.union_total = ledger.matched_AB + ledger.A_only
    ledger.in_source_B = ledger.matched_AB
    ledger.check()
    return LinkedCorpus(records, provenance, ledger)


def union_with_categories(linked: LinkedCorpus, b_records: Sequence[BibRecord],
                          categories: Iterable[str]) -> LinkedCorpus:
    """Add every source-B record from ``categories`` that is not yet present."""
    categories = frozenset(categories)
    if not categories:
        raise ValueError("at least one category is required")
    b, _ = _dedupe(b_records, [lambda r: r.wos_id, lambda r: r.pmid])
    present = {r.wos_id for r, p in zip(linked.records, linked.provenance)
               if p.in_source_b and r.wos_id is not None}
    records = list(linked.records)
    provenance = list(linked.provenance)
    hits = 0
    for r in b:
        if not r.categories & categories:
            continue
        hits += 1
        if r.wos_id in present:
            continue
        present.add(r.wos_id)
        records.append(dataclasses.replace(r, source=None))
        provenance.append(Provenance(False, True))

    ledger = dataclasses.replace(linked.ledger)
    ledger.B_category_hits = hits
    ledger.A_in_categories = sum(1 for r, p in zip(records, provenance)
                                 if p.in_source_a and p.in_source_b and r.categories & categories)
    ledger.B_only = sum(1 for p in provenance if p.in_source_b and not p.in_source_a)
    ledger.union_total = len(records)
    ledger.in_source_B = sum(1 for p in provenance if p.in_source_b)
    ledger.check()
    return LinkedCorpus(records, provenance, ledger)


def passes_filters(record: BibRecord, prov: Provenance,
                   keep_types: frozenset[DocType] = ANALYSIS_DOC_TYPES) -> bool:
    return (prov.in_source_b
            and record.doc_type in keep_types
            and bool(record.countries)
            and bool(record.categories)
            and not record.retracted)


def apply_filters(corpus: LinkedCorpus,
                  keep_types: Iterable[DocType] = ANALYSIS_DOC_TYPES) -> LinkedCorpus:
    keep_types = frozenset(keep_types)
    kept = [(r, p) for r, p in zip(corpus.records, corpus.provenance)
            if passes_filters(r, p, keep_types)]
    ledger = dataclasses.replace(corpus.ledger, after_filters=len(kept))
    ledger.check()
    return LinkedCorpus([r for r, _ in kept], [p for _, p in kept], ledger)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


@dataclass(frozen=True)
class ReportRow:
    stage: str
    value: int | float | None


def coverage_report(ledger: CountsLedger) -> list[ReportRow]:
    """Raw counters followed by the overlap ratios; undefined ratios are None."""
    rows = [ReportRow(k, v) for k, v in ledger.as_dict().items()]
    absent = _ratio(ledger.A_only, ledger.query_hits_A)
    rows += [
        ReportRow("A_absent_share", absent),
        ReportRow("A_in_categories_share", _ratio(ledger.A_in_categories, ledger.query_hits_A)),
        ReportRow("B_category_only_share", _ratio(ledger.B_only, ledger.B_category_hits)),
        ReportRow("overlap", None if absent is None else 1.0 - absent),
    ]
    return rows


def format_value(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return "NA" if math.isnan(value) else repr(value)
    return str(value)


def report_to_tsv(rows: Sequence[ReportRow]) -> str:
    lines = ["stage\tvalue"]
    lines += [f"{row.stage}\t{format_value(row.value)}" for row in rows]
    return "\n".join(lines) + "\n"


def report_to_json(rows: Sequence[ReportRow]) -> str:
    return json.dumps({row.stage: row.value for row in rows}, indent=2) + "\n"
