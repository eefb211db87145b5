"""Bayesian ridge regression fit by evidence maximization.

Model: y = Xw + b + noise, noise precision ``alpha``, isotropic Gaussian
prior on w with precision ``lambda``, Gamma(alpha_1, alpha_2) and
Gamma(lambda_1, lambda_2) hyperpriors.  The intercept is handled by
centering.  The hyperparameters are updated with EM steps, each of which
cannot decrease the penalized log evidence

    L = (p/2) log lam + (n/2) log alpha - alpha/2 |y - Xm|^2 - lam/2 |m|^2
        - 1/2 log|A| - (n/2) log 2pi
        + alpha_1 log alpha - alpha_2 alpha + lambda_1 log lam - lambda_2 lam

with A = lam I + alpha X'X and m = alpha A^-1 X'y.  Everything is computed
in the eigenbasis of X'X so one iteration costs O(np).
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .base import Regressor

LOG_2PI = float(np.log(2 * np.pi))


@njit(cache=True)
def _posterior(s, V, proj, alpha, lam):
    p = s.shape[0]
    mk = np.empty(p)
    for k in range(p):
        mk[k] = alpha * proj[k] / (lam + alpha * s[k])
    return V @ mk, mk


@njit(cache=True)
def _score(Xc, yc, s, w, mk, alpha, lam, a1, a2, l1, l2):
    n = Xc.shape[0]
    p = s.shape[0]
    r = yc - Xc @ w
    rss = r @ r
    logdet = 0.0
    for k in range(p):
        logdet += np.log(lam + alpha * s[k])
    ev = 0.5 * (p * np.log(lam) + n * np.log(alpha) - alpha * rss - lam * (mk @ mk) - logdet - n * LOG_2PI)
    return ev + a1 * np.log(alpha) - a2 * alpha + l1 * np.log(lam) - l2 * lam, rss


@njit(cache=True)
def _em(Xc, yc, s, V, proj, alpha, lam, a1, a2, l1, l2, n_iter, tol, update_lam):
    n = Xc.shape[0]
    p = s.shape[0]
    scores = np.empty(n_iter + 1)
    n_done = 0
    for it in range(n_iter):
        w, mk = _posterior(s, V, proj, alpha, lam)
        sc, rss = _score(Xc, yc, s, w, mk, alpha, lam, a1, a2, l1, l2)
        scores[it] = sc
        tr_sigma = 0.0
        tr_xsx = 0.0
        for k in range(p):
            denom = lam + alpha * s[k]
            tr_sigma += 1.0 / denom
            tr_xsx += s[k] / denom
        new_lam = (p + 2.0 * l1) / (mk @ mk + tr_sigma + 2.0 * l2) if update_lam else lam
        new_alpha = (n + 2.0 * a1) / (rss + tr_xsx + 2.0 * a2)
        n_done = it + 1
        d_alpha = abs(new_alpha - alpha) / alpha
        d_lam = abs(new_lam - lam) / lam
        alpha = new_alpha
        lam = new_lam
        if d_alpha < tol and d_lam < tol:
            break
    w, mk = _posterior(s, V, proj, alpha, lam)
    sc, rss = _score(Xc, yc, s, w, mk, alpha, lam, a1, a2, l1, l2)
    scores[n_done] = sc
    return w, alpha, lam, scores[: n_done + 1], n_done


class BayesianRidge(Regressor):
    """Bayesian ridge regression.

    ``n_iter`` caps the EM iterations; iteration stops earlier once both
    precisions change by less than ``tol`` (relative).  ``n_iter=0``
    leaves the prior-initialized model, which predicts the training mean.
    ``scores_`` holds the penalized log evidence before every update and
    after the last one.
    """

    family = "brr"

    def __init__(self, n_iter=300, alpha_1=1e-6, alpha_2=1e-6, lambda_1=1e-6, lambda_2=1e-6, tol=1e-6,
                 fixed_lambda=None):
        self.n_iter = n_iter
        self.alpha_1 = alpha_1
        self.alpha_2 = alpha_2
        self.lambda_1 = lambda_1
        self.lambda_2 = lambda_2
        self.tol = tol
        # test hook: hold the weight precision at this value
        self.fixed_lambda = fixed_lambda

    def fit(self, X, y):
        X, y = self._validate_training(X, y)
        n, p = X.shape
        self.X_offset_ = X.mean(axis=0)
        self.y_offset_ = float(y.mean())
        Xc = np.ascontiguousarray(X - self.X_offset_)
        yc = y - self.y_offset_
        s, V = np.linalg.eigh(Xc.T @ Xc)
        s = np.clip(s, 0.0, None)
        proj = V.T @ (Xc.T @ yc)
        var = float(yc @ yc) / n
        alpha = 1.0 / (var + np.finfo(float).eps)
        lam = 1.0 if self.fixed_lambda is None else float(self.fixed_lambda)
        self.n_features_in_ = p
        if self.n_iter <= 0:
            self.coef_ = np.zeros(p)
            self.alpha_, self.lambda_ = alpha, lam
            self.scores_ = np.empty(0)
            self.n_iter_ = 0
        else:
            w, alpha, lam, scores, done = _em(
                Xc, yc, s, np.ascontiguousarray(V), proj, alpha, lam,
                float(self.alpha_1), float(self.alpha_2), float(self.lambda_1), float(self.lambda_2),
                int(self.n_iter), float(self.tol), self.fixed_lambda is None,
            )
            self.coef_ = w
            self.alpha_, self.lambda_ = float(alpha), float(lam)
            self.scores_ = scores
            self.n_iter_ = int(done)
        self.intercept_ = self.y_offset_ - float(self.X_offset_ @ self.coef_)
        return self

    def _predict(self, X):
        return X @ self.coef_ + self.intercept_

    def _get_state(self):
        return {
            "n_features_in": self.n_features_in_,
            "coef": self.coef_.tolist(),
            "intercept": self.intercept_,
            "alpha": self.alpha_,
            "lambda": self.lambda_,
        }

    def _set_state(self, state):
        self.n_features_in_ = state["n_features_in"]
        self.coef_ = np.asarray(state["coef"], dtype=float)
        self.intercept_ = state["intercept"]
        self.alpha_ = state["alpha"]
        self.lambda_ = state["lambda"]
