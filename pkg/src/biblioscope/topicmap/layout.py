"""VOS mapping: weighted squared distances under a unit mean-distance constraint.

Minimizes ``sum_{i<j} s_ij ||x_i - x_j||^2`` subject to the average pairwise
distance being 1. The constrained problem is solved through the equivalent
unconstrained objective ``sum s_ij d_ij^2 - sum d_ij``, which is majorized
by a quadratic (the ``-d_ij`` terms are concave). Each iteration solves one
Laplacian system and then rescales to the optimal size, so the constrained
objective never increases.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.csgraph import connected_components
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_symmetric

from .network import TermNetwork, as_array

# horizontal gap between packed components, in mean-distance units
COMPONENT_GAP = 0.1


class LayoutDivergenceError(FloatingPointError):
    pass


def _pairwise(X: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - X[None, :, :]
    return np.sqrt((diff ** 2).sum(-1))


def mean_distance(X: np.ndarray) -> float:
    n = len(X)
    if n < 2:
        return 0.0
    D = _pairwise(X)
    return float(D[np.triu_indices(n, 1)].mean())


def constrained_objective(S: np.ndarray, X: np.ndarray) -> float:
    """``sum_{i<j} s_ij d_ij^2`` after scaling ``X`` to unit mean distance."""
    n = len(X)
    iu = np.triu_indices(n, 1)
    D = _pairwise(X)[iu]
    scale = D.mean()
    return float((S[iu] * D ** 2).sum() / scale ** 2)


def _majorize(S: np.ndarray, X0: np.ndarray, max_iter: int, tol: float):
    n = len(S)
    iu = np.triu_indices(n, 1)
    L = np.diag(S.sum(1)) - S
    factor = linalg.cho_factor(L + np.full((n, n), 1.0 / n))

    def rescale(X):
        D = _pairwise(X)[iu]
        a = (S[iu] * D ** 2).sum()
        return X * (D.sum() / (2.0 * a))

    def objective(X):
        D = _pairwise(X)[iu]
        return float((S[iu] * D ** 2).sum() / D.mean() ** 2)

    X = rescale(X0 - X0.mean(0))
    history = [objective(X)]
    n_iter = 0
    for it in range(1, max_iter + 1):
        D = _pairwise(X)
        with np.errstate(divide="ignore"):
            inv = np.where(D > 0, 1.0 / D, 0.0)
        B = np.diag(inv.sum(1)) - inv
        X_new = rescale(linalg.cho_solve(factor, 0.5 * (B @ X)))
        if not np.all(np.isfinite(X_new)):
            raise LayoutDivergenceError(f"non-finite coordinates at iteration {it}")
        value = objective(X_new)
        if not math.isfinite(value):
            raise LayoutDivergenceError(f"non-finite objective at iteration {it}")
        if value > history[-1]:
            # only rounding can increase a majorization step; we are converged
            break
        X = X_new
        n_iter = it
        history.append(value)
        if history[-2] - value <= tol * history[-2]:
            break
    return X, history, n_iter


def _canonical_orientation(X: np.ndarray) -> np.ndarray:
    X = X - X.mean(0)
    if len(X) < 2:
        return X
    evals, evecs = np.linalg.eigh(X.T @ X)
    X = X @ evecs[:, np.argsort(evals)[::-1]]
    tiny = 1e-9 * max(float(np.abs(X).max()), 1e-300)
    for axis in range(X.shape[1]):
        col = X[:, axis]
        nz = np.flatnonzero(np.abs(col) > tiny)
        if nz.size and col[nz[0]] < 0:
            X[:, axis] = -col
    return X


class VOSLayout(BaseEstimator):
    """Two-dimensional map of a precomputed similarity matrix.

    Node order matters only for the final reflection: each axis is flipped so
    that the first node with a non-zero coordinate on it lies on the positive
    side. Disconnected components are laid out separately and packed left to
    right by decreasing size.

    Parameters
    ----------
    random_state : int, RandomState instance or None, default=0
    max_iter : int, default=1000
    tol : float, default=1e-9
        Stop when an iteration lowers the objective by less than ``tol``
        relative to its previous value.

    Attributes
    ----------
    embedding_ : ndarray of shape (n_nodes, 2)
    objective_history_ : list of float
        Constrained objective per iteration for the largest component.
    component_histories_ : list of list of float
    n_iter_ : int
    """

    def __init__(self, random_state=0, max_iter: int = 1000, tol: float = 1e-9):
        self.random_state = random_state
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        X = check_array(X, accept_sparse="csr", dtype=float)
        if X.shape[0] != X.shape[1]:
            raise ValueError("expected a square similarity matrix")
        X = check_symmetric(X, raise_warning=False)
        S = as_array(X).copy()
        np.fill_diagonal(S, 0.0)
        if (S < 0).any():
            raise ValueError("similarities must be non-negative")
        rng = check_random_state(self.random_state)
        n = len(S)

        n_comp, comp = connected_components(sparse.csr_matrix(S), directed=False)
        groups = [np.flatnonzero(comp == c) for c in range(n_comp)]
        groups.sort(key=lambda g: (-len(g), g[0]))

        coords = np.zeros((n, 2))
        histories = []
        n_iter = 0
        cursor = 0.0
        for members in groups:
            m = len(members)
            if m == 1:
                local, hist = np.zeros((1, 2)), []
            elif m == 2:
                local, hist = np.array([[-0.5, 0.0], [0.5, 0.0]]), []
            else:
                sub = S[np.ix_(members, members)]
                local, hist, it = _majorize(sub, rng.standard_normal((m, 2)),
                                            self.max_iter, self.tol)
                local = _canonical_orientation(local)
                n_iter = max(n_iter, it)
            histories.append(hist)
            local = local - np.array([local[:, 0].min(), local[:, 1].mean()])
            local[:, 0] += cursor
            cursor = local[:, 0].max() + COMPONENT_GAP
            coords[members] = local

        coords = _canonical_orientation(coords)
        if n >= 2:
            md = mean_distance(coords)
            if md > 0:
                coords = coords / md
        self.embedding_ = coords
        self.component_histories_ = histories
        self.objective_history_ = histories[0] if histories else []
        self.n_iter_ = n_iter
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_


def layout(network: TermNetwork, seed: int = 0, max_iter: int = 1000,
           tol: float = 1e-9) -> dict[str, tuple[float, float]]:
    est = VOSLayout(random_state=seed, max_iter=max_iter, tol=tol)
    xy = est.fit_transform(network.similarity_matrix("sim"))
    return {t: (float(x), float(y)) for t, (x, y) in zip(network.terms, xy)}
