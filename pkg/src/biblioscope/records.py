"""Publication records and the line-delimited JSON format they are stored in.

Each line of a record file holds one JSON object with the fixed field names
``pmid``, ``wos_id``, ``doi``, ``title``, ``year``, ``doc_type``,
``countries``, ``categories``, ``mesh`` (list of ``{"d": name, "maj": bool}``),
``keywords``, ``cites`` (citing years, one per citation) and ``retracted``.
Optional fields that are absent are omitted rather than written as null.
"""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

logger = logging.getLogger(__name__)

YEAR_MIN = 1900
YEAR_MAX = 2100


class DocType(str, enum.Enum):
    ARTICLE = "Article"
    PROCEEDINGS_PAPER = "ProceedingsPaper"
    REVIEW = "Review"
    LETTER = "Letter"
    OTHER = "Other"

    @classmethod
    def parse(cls, value: str) -> "DocType":
        try:
            return cls(value)
        except ValueError:
            return cls.OTHER


class SourceTag(str, enum.Enum):
    """Which input stream a record was read from."""

    MEDLINE_LIKE = "MedlineLike"
    CITATION_INDEX_LIKE = "CitationIndexLike"


@dataclass(frozen=True)
class MeshHeading:
    descriptor: str
    major: bool = False


@dataclass
class BibRecord:
    title: str
    year: int
    pmid: str | None = None
    wos_id: str | None = None
    doi: str | None = None
    doc_type: DocType = DocType.ARTICLE
    countries: frozenset[str] = frozenset()
    categories: frozenset[str] = frozenset()
    mesh_terms: tuple[MeshHeading, ...] = ()
    author_keywords: tuple[str, ...] = ()
    citations: tuple[int, ...] = ()
    retracted: bool = False
    source: SourceTag | None = field(default=None, compare=False)

    @property
    def key(self) -> str:
        """Stable identifier used in id lists and provenance tables."""
        if self.wos_id is not None:
            return f"wos:{self.wos_id}"
        return f"pmid:{self.pmid}"


def normalize_doi(doi: str | None) -> str | None:
    if doi is None:
        return None
    doi = doi.strip().lower()
    for prefix in ("https://doi.org/", "http://doi.org/", "https://dx.doi.org/",
                   "http://dx.doi.org/", "doi:"):
        if doi.startswith(prefix):
            doi = doi[len(prefix):]
    return doi or None


def validate_record(record: BibRecord) -> list[str]:
    """Return the labels of every invariant ``record`` violates."""
    violations = []
    if record.pmid is None and record.wos_id is None:
        violations.append("missing_identifier")
    if not YEAR_MIN <= record.year <= YEAR_MAX:
        violations.append("year_out_of_range")
    if any(cy < record.year for cy in record.citations):
        violations.append("citation_before_publication")
    return violations


class RecordFormatError(ValueError):
    pass


def _opt_str(obj: dict, name: str) -> str | None:
    value = obj.get(name)
    if value is None:
        return None
    if not isinstance(value, (str, int)) or isinstance(value, bool):
        raise RecordFormatError(f"field {name!r} must be a string")
    return str(value)


def _str_list(obj: dict, name: str) -> list[str]:
    value = obj.get(name, [])
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise RecordFormatError(f"field {name!r} must be a list of strings")
    return value


def record_from_dict(obj: dict, source: SourceTag | None = None) -> BibRecord:
    if not isinstance(obj, dict):
        raise RecordFormatError("record must be a JSON object")
    year = obj.get("year")
    if not isinstance(year, int) or isinstance(year, bool):
        raise RecordFormatError("field 'year' must be an integer")
    title = obj.get("title", "")
    if not isinstance(title, str):
        raise RecordFormatError("field 'title' must be a string")
    doc_type = obj.get("doc_type", DocType.ARTICLE.value)
    if not isinstance(doc_type, str):
        raise RecordFormatError("field 'doc_type' must be a string")
    mesh = []
    for item in obj.get("mesh", []):
        if not isinstance(item, dict) or not isinstance(item.get("d"), str):
            raise RecordFormatError("mesh entries must be {d: name, maj: bool}")
        mesh.append(MeshHeading(item["d"], bool(item.get("maj", False))))
    cites = obj.get("cites", [])
    if not isinstance(cites, list) or not all(
            isinstance(c, int) and not isinstance(c, bool) for c in cites):
        raise RecordFormatError("field 'cites' must be a list of integers")
    retracted = obj.get("retracted", False)
    if not isinstance(retracted, bool):
        raise RecordFormatError("field 'retracted' must be a boolean")
    return BibRecord(
        title=title,
        year=year,
        pmid=_opt_str(obj, "pmid"),
        wos_id=_opt_str(obj, "wos_id"),
        doi=normalize_doi(_opt_str(obj, "doi")),
        doc_type=DocType.parse(doc_type),
        countries=frozenset(_str_list(obj, "countries")),
        categories=frozenset(_str_list(obj, "categories")),
        mesh_terms=tuple(mesh),
        author_keywords=tuple(_str_list(obj, "keywords")),
        citations=tuple(cites),
        retracted=retracted,
        source=source,
    )


def record_to_dict(record: BibRecord) -> dict:
    """Serialize to the on-disk schema; sets are written sorted."""
    obj: dict = {}
    if record.pmid is not None:
        obj["pmid"] = record.pmid
    if record.wos_id is not None:
        obj["wos_id"] = record.wos_id
    if record.doi is not None:
        obj["doi"] = record.doi
    obj["title"] = record.title
    obj["year"] = record.year
    obj["doc_type"] = record.doc_type.value
    obj["countries"] = sorted(record.countries)
    obj["categories"] = sorted(record.categories)
    obj["mesh"] = [{"d": h.descriptor, "maj": h.major} for h in record.mesh_terms]
    obj["keywords"] = list(record.author_keywords)
    obj["cites"] = list(record.citations)
    obj["retracted"] = record.retracted
    return obj


def dumps_record(record: BibRecord) -> str:
    return json.dumps(record_to_dict(record), ensure_ascii=False, separators=(",", ":"))


@dataclass
class ParseResult:
    records: list[BibRecord]
    n_lines: int = 0
    n_malformed: int = 0
    n_rejected: int = 0
    diagnostics: list[str] = field(default_factory=list)

    @property
    def n_accepted(self) -> int:
        return len(self.records)


def parse_lines(lines: Iterable[str], source: SourceTag) -> ParseResult:
    """Parse record lines, skipping malformed ones and rejecting invalid ones.

    Blank lines count as malformed so that accepted + malformed + rejected
    always equals the number of input lines.
    """
    result = ParseResult(records=[])
    for lineno, line in enumerate(lines, start=1):
        result.n_lines += 1
        try:
            record = record_from_dict(json.loads(line), source)
        except (json.JSONDecodeError, RecordFormatError) as exc:
            result.n_malformed += 1
            msg = f"line {lineno}: malformed record: {exc}"
            result.diagnostics.append(msg)
            logger.warning(msg)
            continue
        violations = validate_record(record)
        if violations:
            result.n_rejected += 1
            msg = f"line {lineno}: rejected: {', '.join(violations)}"
            result.diagnostics.append(msg)
            logger.warning(msg)
            continue
        result.records.append(record)
    return result


def parse_records(path: str | Path | TextIO, source: SourceTag) -> ParseResult:
    """Read a line-delimited record file.

    An unreadable file raises ``OSError``; bad lines are reported in the result.
    """
    if hasattr(path, "read"):
        return parse_lines(path.read().splitlines(), source)
    with open(path, encoding="utf-8") as fh:
        return parse_lines(fh.read().splitlines(), source)


def write_records(records: Iterable[BibRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(dumps_record(record))
            fh.write("\n")
