from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .base import Regressor


class LinearRegression(Regressor):
    """Ordinary least squares with an intercept column.

    Solved by Householder QR of the design matrix.  If the design is rank
    deficient the minimum-norm solution (via SVD) is used instead and
    ``rank_deficient_`` is set.
    """

    family = "lr"

    def __init__(self):
        pass

    def fit(self, X, y):
        X, y = self._validate_training(X, y)
        n, p = X.shape
        A = np.hstack([np.ones((n, 1)), X])
        Q, R = np.linalg.qr(A)
        diag = np.abs(np.diag(R)) if n >= p + 1 else np.zeros(1)
        cutoff = max(n, p + 1) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
        if n >= p + 1 and diag.min() > cutoff:
            beta = solve_triangular(R, Q.T @ y)
            self.rank_ = p + 1
        else:
            beta, _, self.rank_, _ = np.linalg.lstsq(A, y, rcond=None)
        self.rank_deficient_ = bool(self.rank_ < p + 1)
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]
        self.n_features_in_ = p
        return self

    def _predict(self, X):
        return X @ self.coef_ + self.intercept_

    def _get_state(self):
        return {"n_features_in": self.n_features_in_, "coef": self.coef_.tolist(), "intercept": self.intercept_}

    def _set_state(self, state):
        self.n_features_in_ = state["n_features_in"]
        self.coef_ = np.asarray(state["coef"], dtype=float)
        self.intercept_ = state["intercept"]
