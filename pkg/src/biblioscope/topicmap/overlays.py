from __future__ import annotations

import dataclasses
import math
from collections import Counter
from typing import Sequence

from ..records import BibRecord
from .network import CoocEdge, TermNetwork, TermNode


class UnknownCountryError(KeyError):
    pass


def temporal_overlay(network: TermNetwork) -> dict[str, tuple[float, dict[int, float]]]:
    """Per term: (mean publication year, share of occurrences per year)."""
    out = {}
    for node in network.nodes:
        total = sum(node.occ_by_year.values())
        shares = {y: c / total for y, c in sorted(node.occ_by_year.items())}
        mean_year = math.fsum(y * s for y, s in shares.items())
        out[node.term] = (mean_year, shares)
    return out


def country_activity_overlay(network: TermNetwork, country: str) -> dict[str, float]:
    """Relative weight of each term in ``country`` versus the whole map.

    ``index = (occ_c(t) / sum occ_c) / (occ(t) / sum occ)``; a term the
    country never uses gets 0.
    """
    country_total = sum(n.occ_by_country.get(country, 0) for n in network.nodes)
    if country_total == 0:
        raise UnknownCountryError(country)
    world_total = sum(n.occ for n in network.nodes)
    out = {}
    for node in network.nodes:
        local = node.occ_by_country.get(country, 0)
        if local == 0:
            out[node.term] = 0.0
        else:
            out[node.term] = (local / country_total) / (node.occ / world_total)
    return out


def country_submap(network: TermNetwork, records: Sequence[BibRecord],
                   country: str) -> TermNetwork:
    """The world map restricted to one country's publications.

    Nodes, clusters and coordinates are those of the world map; occurrence
    and co-occurrence counts come from the country's records only.
    """
    terms = set(network.terms)
    mine = [r for r in records if country in r.countries]
    if not mine:
        raise UnknownCountryError(country)
    occ: Counter = Counter()
    by_year: dict[str, Counter] = {t: Counter() for t in terms}
    cooc: Counter = Counter()
    for r in mine:
        doc = sorted(set(r.author_keywords) & terms)
        occ.update(doc)
        for t in doc:
            by_year[t][r.year] += 1
        cooc.update((a, b) for i, a in enumerate(doc) for b in doc[i + 1:])
    nodes = [TermNode(n.term, occ[n.term], dict(sorted(by_year[n.term].items())),
                      {country: occ[n.term]} if occ[n.term] else {})
             for n in network.nodes]
    sims = {(e.term_i, e.term_j): e.sim for e in network.edges}
    edges = [CoocEdge(a, b, c, sims.get((a, b), 0.0)) for (a, b), c in sorted(cooc.items())]
    return dataclasses.replace(network, nodes=nodes, edges=edges, n_docs=len(mine),
                               cluster=dict(network.cluster), coords=dict(network.coords))
