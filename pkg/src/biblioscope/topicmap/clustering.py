"""Community detection on a similarity graph by greedy local moving.

The quality function is the weighted modularity used by VOS clustering::

    Q = sum over same-cluster pairs i != j of  s_ij - resolution * n_i * n_j

with node weights ``n_i = k_i / sqrt(K)``, ``k_i = sum_j s_ij`` and
``K = sum_i k_i``. Nodes are visited in a seeded random order and moved to
the cluster with the largest gain. Clusters are then collapsed into single
nodes and the procedure repeats until no node moves.
"""
from __future__ import annotations

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_symmetric

from .network import TermNetwork


def _local_moving(W: sparse.csr_matrix, k: np.ndarray, total: float, resolution: float,
                  rng: np.random.RandomState) -> np.ndarray:
    n = W.shape[0]
    labels = np.arange(n)
    cluster_weight = k.astype(float).copy()
    cluster_size = np.ones(n, dtype=int)
    free: list[int] = []  # ids of empty clusters, ascending
    eps = 1e-12 * total / max(n, 1)
    indptr, indices, data = W.indptr, W.indices, W.data
    moved = True
    while moved:
        moved = False
        for i in rng.permutation(n):
            own = labels[i]
            links: dict[int, float] = {}
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j != i:  # aggregated nodes carry self-loops
                    links[labels[j]] = links.get(labels[j], 0.0) + data[p]
            cluster_weight[own] -= k[i]
            cluster_size[own] -= 1
            scale = resolution * k[i] / total

            # staying wins ties; among other candidates the lowest id wins
            stay = links.get(own, 0.0) - scale * cluster_weight[own]
            best, best_gain = own, stay
            for c in sorted(links):
                g = links[c] - scale * cluster_weight[c]
                if g > best_gain + eps:
                    best, best_gain = c, g
            if cluster_size[own] > 0 and 0.0 > best_gain + eps:
                best, best_gain = free[0], 0.0

            if best != own:
                if best in free:
                    free.remove(best)
                if cluster_size[own] == 0:
                    free.append(own)
                    free.sort()
                labels[i] = best
                moved = True
            cluster_weight[best] += k[i]
            cluster_size[best] += 1
    return labels


def _relabel(labels: np.ndarray) -> np.ndarray:
    """Number clusters 0.. by decreasing size, ties by smallest member index."""
    uniq, first, counts = np.unique(labels, return_index=True, return_counts=True)
    order = sorted(range(len(uniq)), key=lambda u: (-counts[u], first[u]))
    mapping = np.empty(uniq.max() + 1, dtype=int)
    for new, u in enumerate(order):
        mapping[uniq[u]] = new
    return mapping[labels]


def partition_quality(S, labels, resolution: float = 1.0) -> float:
    S = sparse.csr_matrix(S, dtype=float)
    S.setdiag(0)
    S.eliminate_zeros()
    k = np.asarray(S.sum(axis=1)).ravel()
    total = k.sum()
    if total == 0:
        return 0.0
    labels = np.asarray(labels)
    q = 0.0
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        q += S[members][:, members].sum()
        kc = k[members]
        q -= resolution * (kc.sum() ** 2 - (kc ** 2).sum()) / total
    return float(q)


class VOSClustering(ClusterMixin, BaseEstimator):
    """Modularity-style clustering of a precomputed similarity matrix.

    Parameters
    ----------
    resolution : float, default=1.0
        Larger values give more, smaller clusters.
    random_state : int, RandomState instance or None, default=0
        Seeds the node visiting order.
    max_levels : int, default=20
        Maximum number of aggregation rounds.

    Attributes
    ----------
    labels_ : ndarray of shape (n_nodes,)
        Cluster of each node, numbered by decreasing cluster size.
    quality_ : float
        Value of the quality function for ``labels_``.
    """

    def __init__(self, resolution: float = 1.0, random_state=0, max_levels: int = 20):
        self.resolution = resolution
        self.random_state = random_state
        self.max_levels = max_levels

    def fit(self, X, y=None):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        X = check_array(X, accept_sparse="csr", dtype=float)
        if X.shape[0] != X.shape[1]:
            raise ValueError("expected a square similarity matrix")
        X = sparse.csr_matrix(check_symmetric(X, raise_warning=False))
        if X.data.size and X.data.min() < 0:
            raise ValueError("similarities must be non-negative")
        rng = check_random_state(self.random_state)
        n = X.shape[0]
        W = X.copy()
        W.setdiag(0)
        W.eliminate_zeros()
        k = np.asarray(W.sum(axis=1)).ravel()
        total = float(k.sum())
        labels = np.arange(n)
        if total > 0:
            for _ in range(self.max_levels):
                part = _local_moving(W, k, total, self.resolution, rng)
                _, part = np.unique(part, return_inverse=True)
                n_clusters = part.max() + 1
                labels = part[labels]
                if n_clusters == W.shape[0]:
                    break
                P = sparse.csr_matrix((np.ones(W.shape[0]), (np.arange(W.shape[0]), part)),
                                      shape=(W.shape[0], n_clusters))
                W = (P.T @ W @ P).tocsr()
                k = P.T @ k
        self.labels_ = _relabel(labels) if n else labels
        self.quality_ = partition_quality(X, self.labels_, self.resolution) if n else 0.0
        return self


def cluster(network: TermNetwork, resolution: float = 1.0, seed: int = 0) -> dict[str, int]:
    """Cluster ids (1 = largest cluster) keyed by term."""
    est = VOSClustering(resolution=resolution, random_state=seed)
    labels = est.fit_predict(network.similarity_matrix("sim"))
    return {t: int(c) + 1 for t, c in zip(network.terms, labels)}
