from __future__ import annotations

import dataclasses
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from ..records import BibRecord


class EmptyNetworkError(ValueError):
    pass


@dataclass
class TermNode:
    term: str
    occ: int
    occ_by_year: dict[int, int] = field(default_factory=dict)
    occ_by_country: dict[str, int] = field(default_factory=dict)


@dataclass
class CoocEdge:
    term_i: str
    term_j: str
    cooc: int
    sim: float = 0.0


@dataclass
class TermNetwork:
    """Keyword co-occurrence network.

    ``nodes`` are sorted by term and ``edges`` by ``(term_i, term_j)`` with
    ``term_i < term_j``. ``cluster`` and ``coords`` are filled by the
    clustering and layout steps.
    """

    nodes: list[TermNode]
    edges: list[CoocEdge]
    n_docs: int
    cluster: dict[str, int] = field(default_factory=dict)
    coords: dict[str, tuple[float, float]] = field(default_factory=dict)

    @property
    def terms(self) -> list[str]:
        return [n.term for n in self.nodes]

    def node(self, term: str) -> TermNode:
        return self.nodes[self.index[term]]

    @property
    def index(self) -> dict[str, int]:
        return {n.term: i for i, n in enumerate(self.nodes)}

    def similarity_matrix(self, attr: str = "sim") -> sparse.csr_matrix:
        """Symmetric sparse matrix of ``attr`` ("sim" or "cooc") in node order."""
        idx = self.index
        n = len(self.nodes)
        rows, cols, vals = [], [], []
        for e in self.edges:
            i, j = idx[e.term_i], idx[e.term_j]
            v = float(getattr(e, attr))
            rows += [i, j]
            cols += [j, i]
            vals += [v, v]
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def build_network(records: Sequence[BibRecord], min_occ: int = 10) -> TermNetwork:
    """Full-counting occurrence and co-occurrence network over cleaned keywords.

    Each document adds 1 to every distinct term it carries and 1 to every
    unordered pair of its distinct retained terms.
    """
    if min_occ < 1:
        raise ValueError("min_occ must be at least 1")
    docs = [sorted(set(r.author_keywords)) for r in records]
    occ = Counter(t for d in docs for t in d)
    keep = {t for t, c in occ.items() if c >= min_occ}
    by_year: dict[str, Counter] = defaultdict(Counter)
    by_country: dict[str, Counter] = defaultdict(Counter)
    cooc: Counter = Counter()
    for record, doc in zip(records, docs):
        retained = [t for t in doc if t in keep]
        for t in retained:
            by_year[t][record.year] += 1
            for c in record.countries:
                by_country[t][c] += 1
        cooc.update(combinations(retained, 2))
    nodes = [TermNode(t, occ[t], dict(sorted(by_year[t].items())),
                      dict(sorted(by_country[t].items())))
             for t in sorted(keep)]
    edges = [CoocEdge(a, b, c) for (a, b), c in sorted(cooc.items())]
    return TermNetwork(nodes, edges, n_docs=len(records))


def association_strength(network: TermNetwork) -> TermNetwork:
    """Set ``sim = 2 T cooc / (occ_i occ_j)`` with T the number of mapped documents."""
    occ = {n.term: n.occ for n in network.nodes}
    total = network.n_docs
    edges = [dataclasses.replace(e, sim=2.0 * total * e.cooc / (occ[e.term_i] * occ[e.term_j]))
             for e in network.edges]
    return dataclasses.replace(network, edges=edges)


def restrict(network: TermNetwork, terms: Iterable[str]) -> TermNetwork:
    keep = set(terms)
    return dataclasses.replace(
        network,
        nodes=[n for n in network.nodes if n.term in keep],
        edges=[e for e in network.edges if e.term_i in keep and e.term_j in keep],
        cluster={t: c for t, c in network.cluster.items() if t in keep},
        coords={t: xy for t, xy in network.coords.items() if t in keep},
    )


def as_array(S) -> np.ndarray:
    return S.toarray() if sparse.issparse(S) else np.asarray(S, dtype=float)
