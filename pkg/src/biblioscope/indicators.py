"""Publication counts, growth, specialization and normalized impact.

Countries are counted whole: a paper with French and US addresses adds one
to each. Impact normalizes windowed citation counts by the world mean of the
same (category, year) cell, splitting a paper listed in k categories into k
shares of 1/k.
"""
from __future__ import annotations

import csv
import io
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .records import BibRecord

WORLD = "WORLD"
DEFAULT_WINDOW = 2
TABLE_COLUMNS = ("country", "period", "theme", "pub_count", "spec_index", "impact_index")

_PERIOD_RE = re.compile(r"^\s*(\d{4})\s*(?:-\s*(\d{4}))?\s*$")


class IncompleteCitationWindow(ValueError):
    """Raised when some publication years lack a full citation window."""

    def __init__(self, years: Sequence[int], horizon: int, window: int):
        self.years = sorted(years)
        self.horizon = horizon
        self.window = window
        super().__init__(
            f"citation window of {window} years incomplete for publication years "
            f"{', '.join(map(str, self.years))} (citations known through {horizon})")


@dataclass(frozen=True, order=True)
class Period:
    start: int
    end: int

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"period ends before it starts: {self.start}-{self.end}")

    @classmethod
    def parse(cls, text: str | int) -> "Period":
        m = _PERIOD_RE.match(str(text))
        if not m:
            raise ValueError(f"bad period {text!r}; expected YYYY or YYYY-YYYY")
        start = int(m.group(1))
        return cls(start, int(m.group(2) or start))

    def __contains__(self, year: int) -> bool:
        return self.start <= year <= self.end

    @property
    def years(self) -> range:
        return range(self.start, self.end + 1)

    def __str__(self) -> str:
        return str(self.start) if self.start == self.end else f"{self.start}-{self.end}"


def _in(records: Iterable[BibRecord], period: Period | None) -> list[BibRecord]:
    return [r for r in records if period is None or r.year in period]


# -- counts ------------------------------------------------------------------

def count_series(records: Iterable[BibRecord]) -> dict[tuple[str, int], int]:
    """Publications per (country, year), plus a ``WORLD`` row per year."""
    out: Counter = Counter()
    for r in records:
        out[(WORLD, r.year)] += 1
        for c in r.countries:
            out[(c, r.year)] += 1
    return dict(sorted(out.items()))


def period_count(series: Mapping[tuple[str, int], int], country: str, period: Period) -> int:
    return sum(series.get((country, y), 0) for y in period.years)


def growth_rate(count_from: int, count_to: int) -> float | None:
    """Relative change; ``None`` when the baseline is zero."""
    if count_from == 0:
        return None
    return (count_to - count_from) / count_from


def top_producers(series: Mapping[tuple[str, int], int], period: Period,
                  n: int = 20) -> list[tuple[str, int]]:
    totals: Counter = Counter()
    for (c, y), v in series.items():
        if c != WORLD and y in period:
            totals[c] += v
    return sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))[:n]


# -- reference totals --------------------------------------------------------

@dataclass
class ReferenceBase:
    """All-domain publication totals used as specialization denominators.

    ``totals`` maps (country, year) to a whole-counted publication count;
    the ``WORLD`` rows count every publication once.
    """

    totals: dict[tuple[str, int], int] = field(default_factory=dict)

    @classmethod
    def from_records(cls, records: Iterable[BibRecord]) -> "ReferenceBase":
        return cls(count_series(records))

    @classmethod
    def from_tsv(cls, path: str | Path) -> "ReferenceBase":
        totals = {}
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh, delimiter="\t"):
                totals[(row["country"], int(row["year"]))] = int(row["pub_count"])
        return cls(totals)

    def to_tsv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(["country", "year", "pub_count"])
            for (c, y), v in sorted(self.totals.items()):
                w.writerow([c, y, v])

    def total(self, country: str, period: Period) -> int:
        return sum(self.totals.get((country, y), 0) for y in period.years)

    def check_covers(self, domain: Iterable[BibRecord]) -> list[tuple[str, int]]:
        """Cells where the domain count exceeds the reference total."""
        return [k for k, v in count_series(domain).items() if v > self.totals.get(k, 0)]


def specialization_index(domain: Sequence[BibRecord], reference: ReferenceBase,
                         country: str, period: Period) -> float | None:
    """``(D_c / T_c) / (D_w / T_w)``; ``None`` when T_c or D_w is zero."""
    recs = _in(domain, period)
    d_w = len(recs)
    d_c = d_w if country == WORLD else sum(country in r.countries for r in recs)
    t_c = reference.total(country, period)
    t_w = reference.total(WORLD, period)
    if t_c == 0 or d_w == 0 or t_w == 0:
        return None
    if d_c == 0:
        return 0.0
    # one rounding: integer cross-product, then a single division
    return (d_c * t_w) / (t_c * d_w)


# -- impact ------------------------------------------------------------------

def windowed_citations(record: BibRecord, window: int = DEFAULT_WINDOW) -> int:
    last = record.year + window - 1
    return sum(record.year <= y <= last for y in record.citations)


def check_window(records: Iterable[BibRecord], window: int, horizon: int) -> None:
    bad = sorted({r.year for r in records if r.year + window - 1 > horizon})
    if bad:
        raise IncompleteCitationWindow(bad, horizon, window)


def cell_baselines(records: Iterable[BibRecord],
                   window: int = DEFAULT_WINDOW) -> dict[tuple[str, int], float]:
    """World mean windowed citations per (category, year), fractional by category."""
    num: dict[tuple[str, int], list[float]] = defaultdict(list)
    den: dict[tuple[str, int], list[float]] = defaultdict(list)
    for r in records:
        if not r.categories:
            continue
        f = 1.0 / len(r.categories)
        c = windowed_citations(r, window)
        for cat in r.categories:
            num[(cat, r.year)].append(f * c)
            den[(cat, r.year)].append(f)
    return {k: math.fsum(num[k]) / math.fsum(den[k]) for k in sorted(num)}


def impact_index(corpus: Sequence[BibRecord], country: str, period: Period, *,
                 horizon: int, window: int = DEFAULT_WINDOW,
                 baselines: Mapping[tuple[str, int], float] | None = None) -> float | None:
    """Mean cell-normalized citation score of a country's publications.

    ``country`` may be ``WORLD``. Cells whose world baseline is zero are left
    out of both the sum and the weight. Returns ``None`` when nothing remains.
    Raises :class:`IncompleteCitationWindow` rather than truncating when the
    window of any publication year in ``period`` runs past ``horizon``.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    recs = _in(corpus, period)
    check_window(recs, window, horizon)
    if baselines is None:
        baselines = cell_baselines(recs, window)
    num, den = [], []
    for r in recs:
        if not r.categories or (country != WORLD and country not in r.countries):
            continue
        f = 1.0 / len(r.categories)
        c = windowed_citations(r, window)
        for cat in r.categories:
            b = baselines.get((cat, r.year), 0.0)
            if b > 0:
                num.append(f * c / b)
                den.append(f)
    if not den:
        return None
    return math.fsum(num) / math.fsum(den)


# -- tables ------------------------------------------------------------------

@dataclass(frozen=True)
class IndicatorRow:
    country: str
    period: Period
    theme: str
    pub_count: int
    spec_index: float | None
    impact_index: float | None


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class IndicatorTable:
    rows: list[IndicatorRow]
    window: int = DEFAULT_WINDOW
    horizon: int | None = None
    impact_excluded: list[str] = field(default_factory=list)

    def to_tsv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, delimiter="\t", lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for r in self.rows:
            w.writerow([r.country, str(r.period), r.theme, r.pub_count,
                        _fmt(r.spec_index), _fmt(r.impact_index)])
        return buf.getvalue()

    def manifest(self) -> dict:
        return {
            "counting": "whole (countries); fractional 1/k across categories for impact",
            "window": self.window,
            "horizon": self.horizon,
            "impact_weighting": "publication fraction per (category, year) cell",
            "impact_baseline": "world mean of the domain corpus per (category, year)",
            "periods": sorted({str(r.period) for r in self.rows}, key=lambda s: (len(s), s)),
            "impact_excluded_periods": list(self.impact_excluded),
        }


def build_table(domain: Sequence[BibRecord], reference: ReferenceBase,
                countries: Sequence[str], periods: Sequence[Period], *, theme: str,
                horizon: int, window: int = DEFAULT_WINDOW) -> IndicatorTable:
    """One row per (country, period); ``WORLD`` may be listed as a country.

    Periods whose citation window is incomplete get ``NA`` impact and are
    listed in the manifest instead of being truncated.
    """
    rows, excluded = [], []
    for period in periods:
        recs = _in(domain, period)
        try:
            check_window(recs, window, horizon)
            baselines = cell_baselines(recs, window)
        except IncompleteCitationWindow:
            baselines = None
            excluded.append(str(period))
        for c in countries:
            n = len(recs) if c == WORLD else sum(c in r.countries for r in recs)
            spec = specialization_index(domain, reference, c, period)
            imp = None
            if baselines is not None:
                imp = impact_index(recs, c, period, horizon=horizon, window=window,
                                   baselines=baselines)
            rows.append(IndicatorRow(c, period, theme, n, spec, imp))
    return IndicatorTable(rows, window=window, horizon=horizon, impact_excluded=excluded)
