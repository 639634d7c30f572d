"""Per-view neighborhood graphs, locally-linear weights and graph Laplacians."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .core import InputError, ModalityView, NumericalError, ParameterError, as_points


@dataclass(frozen=True, eq=False)
class NeighborhoodGraph:
    """k-NN lists plus the dense ``n x n`` reconstruction weight matrix.

    ``weights[i, j]`` is non-zero only for ``j in neighbors[i]`` and each row
    sums to one. Weights can be negative.
    """

    n: int
    k: int
    neighbors: np.ndarray  # (n, k) int
    weights: np.ndarray    # (n, n) float

    def adjacency(self) -> np.ndarray:
        """Boolean symmetrized edge set of the k-NN graph."""
        A = np.zeros((self.n, self.n), dtype=bool)
        rows = np.repeat(np.arange(self.n), self.k)
        A[rows, self.neighbors.ravel()] = True
        return A | A.T

    def n_components(self) -> int:
        return int(connected_components(self.adjacency(), directed=False)[0])


def knn(points, k: int) -> np.ndarray:
    """Exact k nearest neighbors of every point, excluding the point itself.

    Each row is sorted by ascending Euclidean distance; distances equal up to
    a relative ``1e-12`` are ordered by index so ties resolve to the lower
    index.
    """
    X = as_points(points)
    n = X.shape[0]
    if n < 2:
        raise ParameterError(f"knn needs at least 2 points, got n={n}")
    if not 1 <= k <= n - 1:
        raise ParameterError(f"k={k} must satisfy 1 <= k <= n-1 with n={n}")
    return _kernels.knn(X, int(k))


def distance_rows(point, neighbor_points) -> np.ndarray:
    """Rows ``point - neighbor_points[j]``; the per-point difference matrix."""
    p = np.asarray(point, dtype=np.float64)
    N = as_points(neighbor_points)
    if N.shape[1] != p.shape[0]:
        raise InputError(f"point has dimension {p.shape[0]}, neighbors have {N.shape[1]}")
    return p[None, :] - N


def lle_weights(D, gram_reg: float = 1e-3, point=None) -> np.ndarray:
    """Sum-to-one weights minimizing ``|sum_j w_j D_j|^2``.

    Solves ``G w = 1`` and normalizes, which equals the row sums of ``G^-1``
    over its total. ``G = D D^T + gram_reg * (trace(D D^T)/k) * I``; with
    ``gram_reg = 0`` a singular Gram raises :class:`NumericalError`.
    """
    D = np.atleast_2d(np.asarray(D, dtype=np.float64))
    k = D.shape[0]
    if k == 0:
        raise ParameterError("lle_weights needs k >= 1 neighbors")
    # single-row batch through the same kernel as build_weight_matrix
    X = np.vstack([np.zeros((1, D.shape[1])), -D])
    nbrs = np.arange(1, k + 1, dtype=np.int64)[None, :]
    w, status = _kernels.lle_weights(X, nbrs, float(gram_reg))
    if status[0]:
        where = "" if point is None else f" at point {point}"
        raise NumericalError(f"singular neighbor Gram matrix{where}; use gram_reg > 0")
    return w[0]


def build_weight_matrix(view, k: int = 3, gram_reg: float = 1e-3) -> NeighborhoodGraph:
    X = view.points() if isinstance(view, ModalityView) else as_points(view)
    n = X.shape[0]
    if n < k + 1:
        raise ParameterError(f"view has {n} objects; k={k} needs at least {k + 1}")
    nbrs = knn(X, k)
    w, status = _kernels.lle_weights(X, nbrs, float(gram_reg))
    bad = np.flatnonzero(status)
    if bad.size:
        raise NumericalError(
            f"singular neighbor Gram matrix at point {int(bad[0])}; use gram_reg > 0"
        )
    W = np.zeros((n, n))
    np.put_along_axis(W, nbrs, w, axis=1)
    return NeighborhoodGraph(n=n, k=k, neighbors=nbrs, weights=W)


def symmetric_edge_weights(W) -> np.ndarray:
    """Non-negative symmetric edge weights ``(|W| + |W|^T) / 2``."""
    A = np.abs(np.asarray(W, dtype=np.float64))
    return 0.5 * (A + A.T)


def build_laplacian(graph) -> np.ndarray:
    """Graph Laplacian ``diag(A 1) - A`` over the symmetrized edge weights.

    Uses magnitudes of the reconstruction weights so the result stays
    positive semi-definite with exactly one zero eigenvalue per connected
    component of the k-NN graph.
    """
    W = graph.weights if isinstance(graph, NeighborhoodGraph) else np.asarray(graph, dtype=np.float64)
    A = symmetric_edge_weights(W)
    np.fill_diagonal(A, 0.0)
    return np.diag(A.sum(axis=1)) - A


def quadratic_form(L, f) -> float:
    f = np.asarray(f, dtype=np.float64)
    return float(f @ L @ f)
