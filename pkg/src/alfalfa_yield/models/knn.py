"""k-nearest-neighbour regression over a k-d tree.

Neighbours are the k smallest (squared distance, training index) pairs, so
ties are resolved by training order and the k-d tree returns exactly the
set a full distance scan would.  ``leaf_size`` only shapes the tree.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import KTooLargeError
from .base import Regressor


@njit(cache=True)
def _build_kdtree(X, leaf_size):
    n, d = X.shape
    cap = 2 * n + 1
    perm = np.arange(n)
    start = np.zeros(cap, dtype=np.int64)
    end = np.zeros(cap, dtype=np.int64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    box_lo = np.empty((cap, d))
    box_hi = np.empty((cap, d))
    stack = np.empty(cap, dtype=np.int64)
    start[0] = 0
    end[0] = n
    stack[0] = 0
    sp = 1
    count = 1
    vals = np.empty(n)
    while sp > 0:
        sp -= 1
        node = stack[sp]
        lo = start[node]
        hi = end[node]
        best_dim = 0
        best_spread = -1.0
        for j in range(d):
            mn = np.inf
            mx = -np.inf
            for k in range(lo, hi):
                v = X[perm[k], j]
                if v < mn:
                    mn = v
                if v > mx:
                    mx = v
            box_lo[node, j] = mn
            box_hi[node, j] = mx
            if mx - mn > best_spread:
                best_spread = mx - mn
                best_dim = j
        if hi - lo <= leaf_size or best_spread <= 0.0:
            continue
        m = hi - lo
        for k in range(m):
            vals[k] = X[perm[lo + k], best_dim]
        o = np.argsort(vals[:m], kind="mergesort")
        seg = perm[lo:hi].copy()
        for k in range(m):
            perm[lo + k] = seg[o[k]]
        mid = lo + m // 2
        li = count
        ri = count + 1
        count += 2
        left[node] = li
        right[node] = ri
        start[li] = lo
        end[li] = mid
        start[ri] = mid
        end[ri] = hi
        stack[sp] = ri
        sp += 1
        stack[sp] = li
        sp += 1
    return perm, start[:count].copy(), end[:count].copy(), left[:count].copy(), right[:count].copy(), \
        box_lo[:count].copy(), box_hi[:count].copy()


@njit(cache=True)
def _box_dist2(q, lo, hi):
    s = 0.0
    for j in range(q.shape[0]):
        if q[j] < lo[j]:
            g = lo[j] - q[j]
            s += g * g
        elif q[j] > hi[j]:
            g = q[j] - hi[j]
            s += g * g
    return s


@njit(cache=True)
def _query(X, perm, start, end, left, right, box_lo, box_hi, Q, k):
    nq = Q.shape[0]
    d = X.shape[1]
    out_d2 = np.empty((nq, k))
    out_idx = np.empty((nq, k), dtype=np.int64)
    stack = np.empty(start.shape[0] + 1, dtype=np.int64)
    big = np.iinfo(np.int64).max
    for qi in range(nq):
        q = Q[qi]
        bd = np.full(k, np.inf)
        bi = np.full(k, big, dtype=np.int64)
        stack[0] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if _box_dist2(q, box_lo[node], box_hi[node]) > bd[k - 1]:
                continue
            if left[node] < 0:
                for t in range(start[node], end[node]):
                    p = perm[t]
                    d2 = 0.0
                    for j in range(d):
                        diff = X[p, j] - q[j]
                        d2 += diff * diff
                    if d2 < bd[k - 1] or (d2 == bd[k - 1] and p < bi[k - 1]):
                        pos = k - 1
                        while pos > 0 and (d2 < bd[pos - 1] or (d2 == bd[pos - 1] and p < bi[pos - 1])):
                            bd[pos] = bd[pos - 1]
                            bi[pos] = bi[pos - 1]
                            pos -= 1
                        bd[pos] = d2
                        bi[pos] = p
                continue
            a = left[node]
            b = right[node]
            # visit the nearer child first
            if _box_dist2(q, box_lo[a], box_hi[a]) <= _box_dist2(q, box_lo[b], box_hi[b]):
                stack[sp] = b
                stack[sp + 1] = a
            else:
                stack[sp] = a
                stack[sp + 1] = b
            sp += 2
        out_d2[qi] = bd
        out_idx[qi] = bi
    return out_d2, out_idx


@njit(cache=True)
def _combine(d2, idx, y, distance_weighted):
    nq, k = d2.shape
    out = np.empty(nq)
    for qi in range(nq):
        if not distance_weighted:
            s = 0.0
            for t in range(k):
                s += y[idx[qi, t]]
            out[qi] = s / k
            continue
        zs = 0.0
        zc = 0
        for t in range(k):
            if d2[qi, t] == 0.0:
                zs += y[idx[qi, t]]
                zc += 1
        if zc > 0:
            out[qi] = zs / zc
            continue
        num = 0.0
        den = 0.0
        for t in range(k):
            w = 1.0 / np.sqrt(d2[qi, t])
            num += w * y[idx[qi, t]]
            den += w
        out[qi] = num / den
    return out


class KNeighborsRegressor(Regressor):
    """Euclidean k-NN regression with uniform or inverse-distance weights.

    With ``weights="distance"`` a query that coincides with training points
    gets the mean target of those zero-distance neighbours.
    """

    family = "knn"

    def __init__(self, n_neighbors=5, weights="uniform", leaf_size=30):
        self.n_neighbors = n_neighbors
        self.weights = weights
        self.leaf_size = leaf_size

    def fit(self, X, y):
        if self.weights not in ("uniform", "distance"):
            raise ValueError(f"weights must be 'uniform' or 'distance', got {self.weights!r}")
        if self.leaf_size < 1 or self.n_neighbors < 1:
            raise ValueError("leaf_size and n_neighbors must be positive")
        X, y = self._validate_training(X, y)
        if self.n_neighbors > X.shape[0]:
            raise KTooLargeError(f"n_neighbors={self.n_neighbors} > {X.shape[0]} training rows")
        self.X_ = np.ascontiguousarray(X)
        self.y_ = y.copy()
        self._tree = _build_kdtree(self.X_, int(self.leaf_size))
        self.n_features_in_ = X.shape[1]
        return self

    def kneighbors(self, X):
        """Return (distances, indices) of the k nearest training rows, nearest first."""
        X, _ = self._validate_query(X)
        d2, idx = _query(self.X_, *self._tree, np.ascontiguousarray(X), int(self.n_neighbors))
        return np.sqrt(d2), idx

    def _predict(self, X):
        d2, idx = _query(self.X_, *self._tree, np.ascontiguousarray(X), int(self.n_neighbors))
        return _combine(d2, idx, self.y_, self.weights == "distance")

    def _get_state(self):
        return {"n_features_in": self.n_features_in_, "X": self.X_.tolist(), "y": self.y_.tolist()}

    def _set_state(self, state):
        self.X_ = np.ascontiguousarray(np.asarray(state["X"], dtype=float))
        self.y_ = np.asarray(state["y"], dtype=float)
        self.n_features_in_ = state["n_features_in"]
        self._tree = _build_kdtree(self.X_, int(self.leaf_size))
