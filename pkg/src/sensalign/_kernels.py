"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Three kernels dominate runtime: exact k-NN with tie-aware ordering, batched
locally-linear weight solves, and the dense symmetric eigensolver. k-NN and
the weight solves have two implementations with identical contracts:

* ``numba`` -- loop kernels compiled with ``@njit``.
* ``numpy`` -- vectorized numpy.

Both backends use LAPACK ``eigh`` for the eigensolver.

Set ``SENSALIGN_DISABLE_NUMBA=1`` to force the numpy path. The numba path is
also skipped when numba is not importable.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

# relative tolerance under which two squared distances count as a tie
TIE_RTOL = 1e-12
# Gram matrices with eigenvalue ratio below this are treated as singular
SINGULAR_RTOL = 1e-12

_DISABLED = os.environ.get("SENSALIGN_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError("disabled by SENSALIGN_DISABLE_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"


# --------------------------------------------------------------------------
# numpy path
# --------------------------------------------------------------------------

def _np_sqdist(X):
    diff = X[:, None, :] - X[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _tie_ordered(row, order, k, rtol):
    # reorder near-equal distances by index; only the first k slots matter
    out = []
    pos = 0
    n = len(order)
    while pos < n and len(out) < k:
        rep = row[order[pos]]
        end = pos + 1
        while end < n and row[order[end]] <= rep + rtol * rep:
            end += 1
        out.extend(sorted(int(j) for j in order[pos:end]))
        pos = end
    return out[:k]


def np_knn(X, k, rtol=TIE_RTOL):
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    d2 = _np_sqdist(X)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        out[i] = _tie_ordered(d2[i], order[i], k, rtol)
    return out


def np_lle_weights(X, nbrs, reg):
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, k = nbrs.shape
    D = X[:n, None, :] - X[nbrs]                      # (n, k, d)
    G = np.einsum("nid,njd->nij", D, D)
    tr = np.trace(G, axis1=1, axis2=2)
    status = np.zeros(n, dtype=np.int64)
    if reg > 0:
        scale = np.where(tr > 0, tr / k, 1.0)
        G = G + (reg * scale)[:, None, None] * np.eye(k)
    else:
        ev = np.linalg.eigvalsh(G)
        bad = (ev[:, -1] <= 0) | (ev[:, 0] <= SINGULAR_RTOL * ev[:, -1])
        status[bad] = 1
        G = G.copy()
        G[bad] = np.eye(k)
    w = np.linalg.solve(G, np.ones((n, k, 1)))[..., 0]
    w /= w.sum(axis=1, keepdims=True)
    w[status == 1] = np.nan
    return w, status


def np_eigh(M):
    vals, vecs = np.linalg.eigh(np.asarray(M, dtype=np.float64))
    return vals, vecs


numpy_impl = SimpleNamespace(knn=np_knn, lle_weights=np_lle_weights, eigh=np_eigh, name="numpy")


# --------------------------------------------------------------------------
# numba path
# --------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def _nb_knn(X, k, rtol):
        n, d = X.shape
        out = np.empty((n, k), dtype=np.int64)
        row = np.empty(n)
        for i in range(n):
            for j in range(n):
                s = 0.0
                for c in range(d):
                    t = X[i, c] - X[j, c]
                    s += t * t
                row[j] = s
            row[i] = np.inf
            order = np.argsort(row, kind="mergesort")
            filled = 0
            pos = 0
            while pos < n and filled < k:
                rep = row[order[pos]]
                end = pos + 1
                while end < n and row[order[end]] <= rep + rtol * rep:
                    end += 1
                block = np.sort(order[pos:end])
                for b in range(block.shape[0]):
                    if filled < k:
                        out[i, filled] = block[b]
                        filled += 1
                pos = end
        return out

    @njit(cache=True)
    def _nb_lle_weights(X, nbrs, reg, singular_rtol):
        n, k = nbrs.shape
        d = X.shape[1]
        W = np.empty((n, k))
        status = np.zeros(n, dtype=np.int64)
        D = np.empty((k, d))
        ones = np.ones(k)
        for i in range(n):
            for a in range(k):
                for c in range(d):
                    D[a, c] = X[i, c] - X[nbrs[i, a], c]
            G = D @ D.T
            tr = 0.0
            for a in range(k):
                tr += G[a, a]
            if reg > 0:
                scale = tr / k if tr > 0 else 1.0
                for a in range(k):
                    G[a, a] += reg * scale
            else:
                ev = np.linalg.eigvalsh(G)
                if ev[k - 1] <= 0 or ev[0] <= singular_rtol * ev[k - 1]:
                    status[i] = 1
                    for a in range(k):
                        W[i, a] = np.nan
                    continue
            w = np.linalg.solve(G, ones)
            tot = w.sum()
            for a in range(k):
                W[i, a] = w[a] / tot
        return W, status

    def nb_knn(X, k, rtol=TIE_RTOL):
        return _nb_knn(np.ascontiguousarray(X, dtype=np.float64), int(k), float(rtol))

    def nb_lle_weights(X, nbrs, reg):
        return _nb_lle_weights(
            np.ascontiguousarray(X, dtype=np.float64),
            np.ascontiguousarray(nbrs, dtype=np.int64),
            float(reg),
            SINGULAR_RTOL,
        )

    # a compiled eigensolver cannot beat LAPACK, so both backends share it
    numba_impl = SimpleNamespace(knn=nb_knn, lle_weights=nb_lle_weights, eigh=np_eigh, name="numba")
else:
    numba_impl = None

_active = numba_impl if HAS_NUMBA else numpy_impl


def knn(X, k):
    return _active.knn(X, k)


def lle_weights(X, nbrs, reg):
    return _active.lle_weights(X, nbrs, reg)


def eigh(M):
    return _active.eigh(M)


def implementations():
    """All available backends, numba first when present."""
    return [impl for impl in (numba_impl, numpy_impl) if impl is not None]


def warmup():
    """Trigger JIT compilation so timed sections measure steady state."""
    X = np.random.default_rng(0).normal(size=(6, 3))
    for impl in implementations():
        nb = impl.knn(X, 2)
        impl.lle_weights(X, nb, 1e-3)
        impl.lle_weights(X, nb, 0.0)
        impl.eigh(X.T @ X)
