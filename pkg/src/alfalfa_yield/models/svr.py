"""Epsilon-insensitive support vector regression solved in the dual.

The dual is written over 2n box-constrained variables a = [alpha; alpha*]
with labels z = [+1; -1]:

    minimize   1/2 a'Qa + p'a
    subject to z'a = 0,  0 <= a <= C

where Q_st = z_s z_t K(x_s, x_t) and p = [eps - y; eps + y].  Pairs are
picked with the second-order working-set rule and updated analytically
(SMO) until the maximal KKT violation drops below ``tol``.
"""

from __future__ import annotations

import warnings

import numpy as np
from numba import njit

from ..errors import ConvergenceWarning
from .base import Regressor

TAU = 1e-12


@njit(cache=True)
def _smo(K, y, C, eps, tol, max_iter):
    n = y.shape[0]
    L = 2 * n
    a = np.zeros(L)
    z = np.empty(L)
    p = np.empty(L)
    for i in range(n):
        z[i] = 1.0
        z[i + n] = -1.0
        p[i] = eps - y[i]
        p[i + n] = eps + y[i]
    G = p.copy()
    it = 0
    converged = False
    while it < max_iter:
        # i: maximal violator in I_up
        gmax = -np.inf
        i = -1
        for t in range(L):
            if (z[t] > 0 and a[t] < C) or (z[t] < 0 and a[t] > 0):
                v = -z[t] * G[t]
                if v >= gmax:
                    gmax = v
                    i = t
        gmin = np.inf
        j = -1
        obj_min = np.inf
        if i >= 0:
            ii = i % n
            for t in range(L):
                if (z[t] > 0 and a[t] > 0) or (z[t] < 0 and a[t] < C):
                    v = -z[t] * G[t]
                    if v <= gmin:
                        gmin = v
                    b = gmax - v
                    if b > 0:
                        tt = t % n
                        quad = K[ii, ii] + K[tt, tt] - 2.0 * K[ii, tt]
                        if quad <= 0:
                            quad = TAU
                        val = -(b * b) / quad
                        if val <= obj_min:
                            obj_min = val
                            j = t
        if i < 0 or j < 0 or gmax - gmin < tol:
            converged = True
            break
        it += 1
        ii = i % n
        jj = j % n
        Qij = z[i] * z[j] * K[ii, jj]
        Qii = K[ii, ii]
        Qjj = K[jj, jj]
        old_ai = a[i]
        old_aj = a[j]
        if z[i] != z[j]:
            quad = Qii + Qjj + 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            else:
                if a[j] > C:
                    a[j] = C
                    a[i] = C + diff
        else:
            quad = Qii + Qjj - 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            s = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if s > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = s - C
            else:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = s
            if s > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = s - C
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = s
        dai = a[i] - old_ai
        daj = a[j] - old_aj
        for t in range(L):
            tt = t % n
            G[t] += z[t] * (z[i] * K[ii, tt] * dai + z[j] * K[jj, tt] * daj)

    # bias, libsvm style: average over free variables, else midpoint of bounds
    ub = np.inf
    lb = -np.inf
    nfree = 0
    sfree = 0.0
    for t in range(L):
        yg = z[t] * G[t]
        if a[t] >= C:
            if z[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif a[t] <= 0:
            if z[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nfree += 1
            sfree += yg
    if nfree > 0:
        rho = sfree / nfree
    else:
        rho = (ub + lb) / 2.0
    obj = 0.0
    for t in range(L):
        obj += a[t] * (G[t] + p[t])
    obj *= 0.5
    return a[:n] - a[n:], a, -rho, obj, it, converged


def solve_dual(K, y, C, epsilon, tol=1e-3, max_iter=None):
    """Solve the epsilon-SVR dual for a precomputed kernel matrix.

    Returns a dict with ``coef`` (alpha - alpha*), ``alpha`` (the 2n dual
    variables), ``bias``, ``objective`` (value of the minimized dual),
    ``n_iter`` and ``converged``.
    """
    K = np.ascontiguousarray(K, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if C <= 0:
        raise ValueError("C must be > 0")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if max_iter is None:
        max_iter = max(100_000, 100 * 2 * len(y))
    coef, alpha, bias, obj, it, ok = _smo(K, y, float(C), float(epsilon), float(tol), int(max_iter))
    return {"coef": coef, "alpha": alpha, "bias": bias, "objective": obj, "n_iter": it, "converged": ok}


def dual_objective(K, y, alpha, epsilon):
    """1/2 a'Qa + p'a for the stacked dual vector ``alpha`` (length 2n)."""
    n = len(y)
    beta = alpha[:n] - alpha[n:]
    return 0.5 * beta @ K @ beta + epsilon * alpha.sum() - y @ beta


def kkt_residuals(K, y, alpha, bias, C, epsilon):
    """Per-variable KKT violation of a dual solution, in target units.

    For each training row the residual r = y - f(x) must satisfy
    r <= eps when alpha = 0, r >= eps when alpha = C and r = eps in
    between (mirrored for alpha*); the last n entries also include the
    complementary product condition min(alpha, alpha*) = 0.
    """
    n = len(y)
    a, a_star = alpha[:n], alpha[n:]
    f = K @ (a - a_star) + bias
    r = y - f
    out = np.empty(2 * n)
    for idx, (av, s) in enumerate(((a, r), (a_star, -r))):
        lo = av <= 0
        hi = av >= C
        free = ~(lo | hi)
        v = np.zeros(n)
        v[lo] = np.maximum(0.0, s[lo] - epsilon)
        v[hi] = np.maximum(0.0, epsilon - s[hi])
        v[free] = np.abs(s[free] - epsilon)
        out[idx * n:(idx + 1) * n] = v
    out[n:] = np.maximum(out[n:], np.minimum(a, a_star))
    return out


def kernel_matrix(A, B, kernel, gamma, degree):
    dot = A @ B.T
    if kernel == "linear":
        return dot
    if kernel == "poly":
        return (gamma * dot) ** degree
    if kernel == "rbf":
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * dot
        return np.exp(-gamma * np.maximum(sq, 0.0))
    if kernel == "sigmoid":
        return np.tanh(gamma * dot)
    raise ValueError(f"unknown kernel {kernel!r}")


class SVR(Regressor):
    """Kernel epsilon-SVR.

    Targets are standardized before solving (so ``epsilon`` is in units of
    the target standard deviation) and predictions are mapped back.
    ``gamma="scale"`` means 1 / (d * var(X)) over all entries of X;
    ``"auto"`` means 1 / d.
    """

    family = "svm"

    def __init__(self, kernel="rbf", C=1.0, gamma="scale", degree=3, epsilon=0.1, tol=1e-3, max_iter=None):
        self.kernel = kernel
        self.C = C
        self.gamma = gamma
        self.degree = degree
        self.epsilon = epsilon
        self.tol = tol
        self.max_iter = max_iter

    def _gamma_value(self, X):
        if self.gamma == "scale":
            var = X.var()
            return 1.0 / (X.shape[1] * var) if var > 0 else 1.0
        if self.gamma == "auto":
            return 1.0 / X.shape[1]
        return float(self.gamma)

    def fit(self, X, y):
        X, y = self._validate_training(X, y)
        self.gamma_ = self._gamma_value(X)
        self.y_mean_ = float(y.mean())
        sd = float(y.std())
        self.y_scale_ = sd if sd > 0 else 1.0
        ys = (y - self.y_mean_) / self.y_scale_
        K = kernel_matrix(X, X, self.kernel, self.gamma_, self.degree)
        sol = solve_dual(K, ys, self.C, self.epsilon, self.tol, self.max_iter)
        self.converged_ = sol["converged"]
        self.n_iter_ = sol["n_iter"]
        if not self.converged_:
            warnings.warn(f"SVR stopped after {self.n_iter_} iterations without reaching tol={self.tol}",
                          ConvergenceWarning, stacklevel=2)
        self.dual_objective_ = sol["objective"]
        keep = sol["coef"] != 0
        self.support_vectors_ = X[keep]
        self.dual_coef_ = sol["coef"][keep]
        self.intercept_ = sol["bias"]
        self.n_features_in_ = X.shape[1]
        return self

    def _decision(self, X):
        if self.dual_coef_.size == 0:
            return np.full(X.shape[0], self.intercept_)
        K = kernel_matrix(X, self.support_vectors_, self.kernel, self.gamma_, self.degree)
        return K @ self.dual_coef_ + self.intercept_

    def _predict(self, X):
        return self._decision(X) * self.y_scale_ + self.y_mean_

    def _get_state(self):
        return {
            "n_features_in": self.n_features_in_,
            "gamma": self.gamma_,
            "y_mean": self.y_mean_,
            "y_scale": self.y_scale_,
            "support_vectors": self.support_vectors_.tolist(),
            "dual_coef": self.dual_coef_.tolist(),
            "intercept": self.intercept_,
            "converged": self.converged_,
        }

    def _set_state(self, state):
        self.n_features_in_ = state["n_features_in"]
        self.gamma_ = state["gamma"]
        self.y_mean_ = state["y_mean"]
        self.y_scale_ = state["y_scale"]
        self.support_vectors_ = np.asarray(state["support_vectors"], dtype=float).reshape(-1, self.n_features_in_)
        self.dual_coef_ = np.asarray(state["dual_coef"], dtype=float)
        self.intercept_ = state["intercept"]
        self.converged_ = state["converged"]
