"""Tab-separated map export and re-import.

A map directory holds ``nodes.tsv``, ``edges.tsv``, ``term_years.tsv`` and
``term_countries.tsv``. Floats are written with ``repr`` so that a round trip
is exact and repeated runs are byte-identical.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping

from .network import CoocEdge, TermNetwork, TermNode
from .overlays import temporal_overlay


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_map(network: TermNetwork, directory: str | Path,
              activity: Mapping[str, Mapping[str, float]] | None = None) -> list[Path]:
    """Write the four map tables; ``activity`` maps country -> term -> index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    activity = dict(sorted((activity or {}).items()))
    temporal = temporal_overlay(network)
    header = ["term", "occ", "cluster", "x", "y", "mean_year"]
    header += [f"activity_{c}" for c in activity]
    rows = []
    for node in network.nodes:
        x, y = network.coords.get(node.term, (None, None))
        row = [node.term, node.occ, network.cluster.get(node.term), x, y,
               temporal[node.term][0] if node.occ_by_year else None]
        row += [activity[c].get(node.term) for c in activity]
        rows.append(row)
    paths = [directory / name for name in
             ("nodes.tsv", "edges.tsv", "term_years.tsv", "term_countries.tsv")]
    _write(paths[0], header, rows)
    _write(paths[1], ["term_i", "term_j", "cooc", "sim"],
           ([e.term_i, e.term_j, e.cooc, float(e.sim)] for e in network.edges))
    _write(paths[2], ["term", "year", "count"],
           ([n.term, y, c] for n in network.nodes for y, c in n.occ_by_year.items()))
    _write(paths[3], ["term", "country", "count"],
           ([n.term, k, c] for n in network.nodes for k, c in n.occ_by_country.items()))
    return paths


def _read(path: Path) -> list[dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


def read_map(directory: str | Path, n_docs: int | None = None) -> TermNetwork:
    """Load a map written by :func:`write_map`.

    The document count is not part of the export; pass it when the
    similarities need recomputing.
    """
    directory = Path(directory)
    nodes = []
    cluster, coords = {}, {}
    for row in _read(directory / "nodes.tsv"):
        term = row["term"]
        nodes.append(TermNode(term, int(row["occ"])))
        if row["cluster"] != "NA":
            cluster[term] = int(row["cluster"])
        if row["x"] != "NA":
            coords[term] = (float(row["x"]), float(row["y"]))
    by_term = {n.term: n for n in nodes}
    years = directory / "term_years.tsv"
    if years.exists():
        for row in _read(years):
            by_term[row["term"]].occ_by_year[int(row["year"])] = int(row["count"])
    countries = directory / "term_countries.tsv"
    if countries.exists():
        for row in _read(countries):
            by_term[row["term"]].occ_by_country[row["country"]] = int(row["count"])
    edges = [CoocEdge(r["term_i"], r["term_j"], int(r["cooc"]), float(r["sim"]))
             for r in _read(directory / "edges.tsv")]
    return TermNetwork(nodes, edges, n_docs=n_docs or 0, cluster=cluster, coords=coords)
