"""Command-line pipeline: query, build, map, indicators, covid, report.

Each subcommand reads one YAML run configuration (flags override it), writes
its outputs under ``<out>/<subcommand>/`` and a ``manifest.json`` holding the
configuration hash, input digests, library versions and output digests. No
timestamps or absolute paths are recorded, so identical inputs give
byte-identical output trees.

Exit codes: 0 success, 1 pipeline error, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import platform
import sys
from collections import Counter
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path
from typing import Any

import yaml

from . import corpus as corpus_mod
from . import indicators as ind
from .corpus import LinkedCorpus, coverage_report, report_to_json, report_to_tsv
from .keywords import clean_corpus, covid_filter, load_pattern_map
from .mesh import (
    INFECTIOUS_DISEASES_QUERY, QuerySyntaxError, UnknownDescriptorError, explain,
    load_thesaurus, parse_query, run_query,
)
from .records import BibRecord, DocType, SourceTag, parse_records, write_records
from .topicmap import (
    EmptyNetworkError, association_strength, build_network, cluster, country_activity_overlay,
    country_submap, layout, write_map,
)
from .topicmap.overlays import UnknownCountryError

log = logging.getLogger("biblioscope")

DEFAULTS: dict[str, Any] = {
    "inputs": {"source_a": None, "source_b": None, "thesaurus": None,
               "reference": None, "pattern_map": None},
    "query": None,
    "query_file": None,
    "categories": sorted(corpus_mod.DEFAULT_CATEGORIES),
    "filters": {"doc_types": [t.value for t in sorted(corpus_mod.ANALYSIS_DOC_TYPES,
                                                      key=lambda t: t.value)]},
    "map": {"min_occ": 10, "resolution": 1.0, "max_iter": 1000, "tol": 1e-9,
            "years": [2000, 2020], "countries": []},
    "indicators": {"window": ind.DEFAULT_WINDOW, "horizon": None,
                   "periods": ["2000", "2005-2009", "2010-2014", "2015-2019", "2020"],
                   "countries": [ind.WORLD]},
    "covid": {"years": [2019, 2020], "periods": ["2020"]},
    "seed": 0,
    "out": "out",
}


class UsageError(Exception):
    pass


class PipelineError(Exception):
    pass


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if k not in out:
            raise UsageError(f"unknown configuration key {k!r}")
        if isinstance(out[k], dict) and isinstance(v, dict):
            for kk in v:
                if kk not in out[k]:
                    raise UsageError(f"unknown configuration key {k}.{kk}")
            out[k].update(v)
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    values: dict
    base_dir: Path
    out: Path

    @classmethod
    def load(cls, path: str | None, overrides: dict) -> "RunConfig":
        raw: dict = {}
        base = Path.cwd()
        if path is not None:
            p = Path(path)
            try:
                raw = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
            except OSError as exc:
                raise UsageError(f"cannot read config: {exc}") from None
            except yaml.YAMLError as exc:
                raise UsageError(f"invalid config {p}: {exc}") from None
            if not isinstance(raw, dict):
                raise UsageError("config must be a mapping")
            base = p.resolve().parent
        values = _merge(DEFAULTS, raw)
        for k, v in overrides.items():
            if v is not None:
                values[k] = v
        cfg = cls(values, base, Path(values["out"]) if values["out"] else Path("out"))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        v = self.values
        if not isinstance(v["seed"], int) or v["seed"] < 0:
            raise UsageError("seed must be a non-negative integer")
        m = v["map"]
        if not isinstance(m["min_occ"], int) or m["min_occ"] < 1:
            raise UsageError("map.min_occ must be an integer >= 1")
        if not m["resolution"] > 0:
            raise UsageError("map.resolution must be positive")
        if not isinstance(m["max_iter"], int) or m["max_iter"] < 1:
            raise UsageError("map.max_iter must be a positive integer")
        if not v["categories"]:
            raise UsageError("categories must not be empty")
        for t in v["filters"]["doc_types"]:
            if DocType.parse(t) is DocType.OTHER and t != DocType.OTHER.value:
                raise UsageError(f"unknown document type {t!r}")
        if not isinstance(v["indicators"]["window"], int) or v["indicators"]["window"] < 1:
            raise UsageError("indicators.window must be a positive integer")
        try:
            for p in v["indicators"]["periods"] + v["covid"]["periods"]:
                ind.Period.parse(p)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        for name, rel in v["inputs"].items():
            if rel is not None and not self.path(rel).exists():
                raise UsageError(f"input {name}: {self.path(rel)} does not exist")
        if v["query_file"] is not None and not self.path(v["query_file"]).exists():
            raise UsageError(f"query_file {self.path(v['query_file'])} does not exist")

    def path(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p

    def input(self, name: str) -> Path:
        rel = self.values["inputs"][name]
        if rel is None:
            raise UsageError(f"configuration lacks inputs.{name}")
        return self.path(rel)

    @property
    def digest(self) -> str:
        frozen = {k: v for k, v in self.values.items() if k != "out"}
        blob = json.dumps(frozen, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# -- helpers -----------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions() -> dict[str, str]:
    out = {"python": platform.python_version()}
    for dist in ("artifact", "numpy", "scipy", "scikit-learn", "PyYAML"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = "unknown"
    return out


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _manifest(cfg: RunConfig, command: str, outdir: Path, inputs: dict[str, Path],
              extra: dict | None = None) -> None:
    outputs = {}
    for p in sorted(outdir.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            outputs[p.relative_to(outdir).as_posix()] = _sha256(p)
    doc = {
        "command": command,
        "config_sha256": cfg.digest,
        "config": {k: v for k, v in cfg.values.items() if k != "out"},
        "inputs": {k: _sha256(p) for k, p in sorted(inputs.items())},
        "versions": _versions(),
        "outputs": outputs,
    }
    if extra:
        doc.update(extra)
    _write_text(outdir / "manifest.json",
                json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def _load(path: Path, source: SourceTag) -> tuple[list[BibRecord], dict]:
    try:
        res = parse_records(path, source)
    except OSError as exc:
        raise PipelineError(f"cannot read {path}: {exc}") from None
    stats = {"lines": res.n_lines, "accepted": res.n_accepted,
             "malformed": res.n_malformed, "rejected": res.n_rejected}
    return res.records, stats


def _query_text(cfg: RunConfig, args) -> str:
    if getattr(args, "query", None) is not None:
        text = args.query
    elif getattr(args, "query_file", None) is not None:
        text = Path(args.query_file).read_text(encoding="utf-8")
    elif cfg.values["query_file"] is not None:
        text = cfg.path(cfg.values["query_file"]).read_text(encoding="utf-8")
    elif cfg.values["query"] is not None:
        text = cfg.values["query"]
    else:
        text = INFECTIOUS_DISEASES_QUERY
    if not text.strip():
        raise UsageError("query is empty")
    return text.strip()


def _select(cfg: RunConfig, args):
    text = _query_text(cfg, args)
    try:
        expr = parse_query(text)
    except QuerySyntaxError as exc:
        raise PipelineError(f"query syntax error at position {exc.position}: {exc}") from None
    thesaurus = load_thesaurus(cfg.input("thesaurus"))
    a_records, a_stats = _load(cfg.input("source_a"), SourceTag.MEDLINE_LIKE)
    try:
        hits = run_query(a_records, expr, thesaurus)
    except UnknownDescriptorError as exc:
        raise PipelineError(f"query names a descriptor absent from the thesaurus: {exc}") from None
    return text, expr, thesaurus, a_records, a_stats, hits


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def _read_build(cfg: RunConfig) -> tuple[list[BibRecord], Path]:
    path = cfg.out / "build" / "corpus.jsonl"
    if not path.exists():
        raise UsageError(f"{path} not found; run 'build' first")
    records, _ = _load(path, SourceTag.CITATION_INDEX_LIKE)
    return records, path


# -- subcommands -------------------------------------------------------------

def cmd_query(cfg: RunConfig, args) -> int:
    text, expr, thesaurus, a_records, a_stats, hits = _select(cfg, args)
    outdir = cfg.out / "query"
    outdir.mkdir(parents=True, exist_ok=True)
    _write_text(outdir / "selected_ids.txt", "".join(f"{r.pmid}\n" for r in hits))
    _write_text(outdir / "query.txt", text + "\n")
    if args.explain is not None:
        matches = [r for r in a_records if r.pmid == args.explain]
        if not matches:
            raise UsageError(f"no source-A record with pmid {args.explain}")
        trace = "\n".join(explain(matches[0], expr, thesaurus)) + "\n"
        _write_text(outdir / f"explain_{args.explain}.txt", trace)
        _say(args, trace.rstrip("\n"))
    _manifest(cfg, "query", outdir,
              {"source_a": cfg.input("source_a"), "thesaurus": cfg.input("thesaurus")},
              {"hits": len(hits), "source_a": a_stats})
    _say(args, f"{len(hits)} hits")
    return 0


def _provenance_tsv(linked: LinkedCorpus) -> str:
    lines = ["key\tin_source_a\tin_source_b\tmatched_by"]
    for r, p in zip(linked.records, linked.provenance):
        lines.append(f"{r.key}\t{int(p.in_source_a)}\t{int(p.in_source_b)}\t{p.matched_by.value}")
    return "\n".join(lines) + "\n"


def cmd_build(cfg: RunConfig, args) -> int:
    _, _, _, _, a_stats, hits = _select(cfg, args)
    b_records, b_stats = _load(cfg.input("source_b"), SourceTag.CITATION_INDEX_LIKE)
    v = cfg.values
    try:
        linked = corpus_mod.link(hits, b_records)
        union = corpus_mod.union_with_categories(linked, b_records, v["categories"])
        filtered = corpus_mod.apply_filters(
            union, [DocType.parse(t) for t in v["filters"]["doc_types"]])
    except corpus_mod.LedgerError as exc:
        raise PipelineError(f"ledger invariant violated: {exc}") from None

    with_kw = [r for r in filtered.records if r.author_keywords]
    cleaned, removed = clean_corpus(with_kw)
    if len(cleaned) != len(with_kw) - removed:
        raise PipelineError("keyword cleaning lost records")
    rows = coverage_report(filtered.ledger)
    rows += [corpus_mod.ReportRow("with_keywords", len(with_kw)),
             corpus_mod.ReportRow("keyword_cleaning_removed", removed),
             corpus_mod.ReportRow("mapping_corpus", len(cleaned))]

    outdir = cfg.out / "build"
    outdir.mkdir(parents=True, exist_ok=True)
    write_records(filtered.records, outdir / "corpus.jsonl")
    write_records(cleaned, outdir / "mapping_corpus.jsonl")
    _write_text(outdir / "provenance.tsv", _provenance_tsv(union))
    _write_text(outdir / "coverage.tsv", report_to_tsv(rows))
    _write_text(outdir / "coverage.json", report_to_json(rows))
    _manifest(cfg, "build", outdir,
              {"source_a": cfg.input("source_a"), "source_b": cfg.input("source_b"),
               "thesaurus": cfg.input("thesaurus")},
              {"source_a": a_stats, "source_b": b_stats})
    _say(args, report_to_tsv(rows).rstrip("\n"))
    return 0


def cmd_map(cfg: RunConfig, args) -> int:
    path = cfg.out / "build" / "mapping_corpus.jsonl"
    if not path.exists():
        raise UsageError(f"{path} not found; run 'build' first")
    records, _ = _load(path, SourceTag.CITATION_INDEX_LIKE)
    m = cfg.values["map"]
    first, last = m["years"]
    records = [r for r in records if first <= r.year <= last]
    net = build_network(records, min_occ=m["min_occ"])
    if not net.nodes:
        raise PipelineError(f"no keyword reaches min_occ={m['min_occ']}; the map would be empty")
    net = association_strength(net)
    seed = cfg.values["seed"]
    net.cluster = cluster(net, resolution=m["resolution"], seed=seed)
    net.coords = layout(net, seed=seed, max_iter=m["max_iter"], tol=m["tol"])
    activity = {}
    for c in m["countries"]:
        try:
            activity[c] = country_activity_overlay(net, c)
        except UnknownCountryError:
            raise PipelineError(f"country {c!r} has no publication on the map") from None
    outdir = cfg.out / "map"
    write_map(net, outdir, activity)
    for c in m["countries"]:
        write_map(country_submap(net, records, c), outdir / f"country_{c}")
    sizes = Counter(net.cluster.values())
    _manifest(cfg, "map", outdir, {"mapping_corpus": path},
              {"n_docs": net.n_docs, "n_nodes": len(net.nodes), "n_edges": len(net.edges),
               "cluster_sizes": {str(k): sizes[k] for k in sorted(sizes)}})
    _say(args, f"{len(net.nodes)} terms, {len(net.edges)} links, {len(sizes)} clusters")
    return 0


def _indicator_run(cfg: RunConfig, domain: list[BibRecord], periods, countries,
                   theme: str, outdir: Path, extra_inputs: dict, args) -> int:
    icfg = cfg.values["indicators"]
    reference = ind.ReferenceBase.from_tsv(cfg.input("reference"))
    horizon = icfg["horizon"]
    if horizon is None:
        raise UsageError("indicators.horizon (last year with complete citations) is required")
    over = reference.check_covers(domain)
    if over:
        raise PipelineError(f"reference totals below domain counts for {over[:5]}")
    table = ind.build_table(domain, reference, countries, periods, theme=theme,
                            horizon=horizon, window=icfg["window"])
    outdir.mkdir(parents=True, exist_ok=True)
    _write_text(outdir / "indicators.tsv", table.to_tsv())
    series = ind.count_series(domain)
    lines = ["country\tyear\tpub_count"] + [f"{c}\t{y}\t{n}" for (c, y), n in series.items()]
    _write_text(outdir / "counts.tsv", "\n".join(lines) + "\n")
    _manifest(cfg, args.command, outdir,
              {"reference": cfg.input("reference"), **extra_inputs},
              {"indicators": table.manifest()})
    _say(args, table.to_tsv().rstrip("\n"))
    return 0


def cmd_indicators(cfg: RunConfig, args) -> int:
    domain, path = _read_build(cfg)
    icfg = cfg.values["indicators"]
    periods = [ind.Period.parse(p) for p in icfg["periods"]]
    if args.strict:
        try:
            for p in periods:
                ind.check_window([r for r in domain if r.year in p], icfg["window"],
                                 icfg["horizon"])
        except ind.IncompleteCitationWindow as exc:
            raise PipelineError(str(exc)) from None
    return _indicator_run(cfg, domain, periods, icfg["countries"], "infectious_diseases",
                          cfg.out / "indicators", {"corpus": path}, args)


def cmd_covid(cfg: RunConfig, args) -> int:
    domain, path = _read_build(cfg)
    pm_path = cfg.values["inputs"]["pattern_map"]
    pattern_map = load_pattern_map(cfg.path(pm_path) if pm_path else None)
    years = tuple(cfg.values["covid"]["years"])
    selected = covid_filter(domain, pattern_map, years=years)
    outdir = cfg.out / "covid"
    outdir.mkdir(parents=True, exist_ok=True)
    write_records(selected, outdir / "covid_corpus.jsonl")
    canon = Counter(kw for r in selected for kw in set(r.author_keywords)
                    if kw in pattern_map.canonical_terms)
    lines = ["term\tpub_count"] + [f"{t}\t{n}" for t, n in sorted(canon.items())]
    _write_text(outdir / "terms.tsv", "\n".join(lines) + "\n")
    periods = [ind.Period.parse(p) for p in cfg.values["covid"]["periods"]]
    inputs = {"corpus": path}
    if pm_path:
        inputs["pattern_map"] = cfg.path(pm_path)
    return _indicator_run(cfg, selected, periods, cfg.values["indicators"]["countries"],
                          "covid", outdir, inputs, args)


def cmd_report(cfg: RunConfig, args) -> int:
    build = cfg.out / "build" / "coverage.tsv"
    if not build.exists():
        raise UsageError(f"{build} not found; run 'build' first")
    domain, path = _read_build(cfg)
    series = ind.count_series(domain)
    periods = [ind.Period.parse(p) for p in cfg.values["indicators"]["periods"]]
    countries = sorted({c for c, _ in series} - {ind.WORLD})
    outdir = cfg.out / "report"
    outdir.mkdir(parents=True, exist_ok=True)
    _write_text(outdir / "coverage.tsv", build.read_text(encoding="utf-8"))
    rows = ["country\tperiod\tpub_count\tgrowth_from_previous"]
    for c in [ind.WORLD] + countries:
        prev = None
        for p in periods:
            n = ind.period_count(series, c, p)
            g = None if prev is None else ind.growth_rate(prev, n)
            rows.append(f"{c}\t{p}\t{n}\t{corpus_mod.format_value(g)}")
            prev = n
    _write_text(outdir / "growth.tsv", "\n".join(rows) + "\n")
    whole = ind.Period(periods[0].start, periods[-1].end)
    top = ind.top_producers(series, whole)
    _write_text(outdir / "top_producers.tsv",
                "\n".join(["rank\tcountry\tpub_count"] +
                          [f"{i}\t{c}\t{n}" for i, (c, n) in enumerate(top, 1)]) + "\n")
    _manifest(cfg, "report", outdir, {"corpus": path, "coverage": build})
    _say(args, build.read_text(encoding="utf-8").rstrip("\n"))
    return 0


COMMANDS = {"query": cmd_query, "build": cmd_build, "map": cmd_map,
            "indicators": cmd_indicators, "covid": cmd_covid, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="seed for clustering and layout")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")

    parser = argparse.ArgumentParser(prog="biblioscope", description=__doc__.splitlines()[0],
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    q = sub.add_parser("query", parents=[common], help="run the thesaurus query on source A")
    q.add_argument("--query", help="query text (overrides the config)")
    q.add_argument("--query-file", help="file holding the query")
    q.add_argument("--explain", metavar="PMID", help="print the clause trace for one record")
    b = sub.add_parser("build", parents=[common],
                       help="link sources, add category records, filter, clean keywords")
    b.add_argument("--query", help=argparse.SUPPRESS)
    b.add_argument("--query-file", help=argparse.SUPPRESS)
    sub.add_parser("map", parents=[common], help="keyword co-occurrence map with overlays")
    i = sub.add_parser("indicators", parents=[common],
                       help="counts, specialization and impact per country and period")
    i.add_argument("--strict", action="store_true",
                   help="fail instead of reporting NA impact for incomplete citation windows")
    c = sub.add_parser("covid", parents=[common], help="Covid keyword sub-corpus and indicators")
    c.add_argument("--strict", action="store_true", help=argparse.SUPPRESS)
    sub.add_parser("report", parents=[common], help="coverage ledger and growth tables")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config, {"seed": args.seed, "out": args.out})
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"biblioscope {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (PipelineError, EmptyNetworkError, ind.IncompleteCitationWindow) as exc:
        print(f"biblioscope {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
