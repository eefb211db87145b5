from __future__ import annotations

import numpy as np

from .base import Regressor
from .tree import DecisionTreeRegressor


class RandomForestRegressor(Regressor):
    """Bagged MAE regression trees.

    Each tree sees a bootstrap resample of size n drawn with replacement
    from a generator seeded with ``random_state``; every split considers
    all features.  The prediction is the mean of the tree predictions.
    ``bootstrap=False`` fits every tree on the full data.
    """

    family = "rf"

    def __init__(self, n_estimators=100, max_depth=5, criterion="mae", random_state=0, bootstrap=True):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.criterion = criterion
        self.random_state = random_state
        self.bootstrap = bootstrap

    def fit(self, X, y):
        X, y = self._validate_training(X, y)
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        rng = np.random.default_rng(self.random_state)
        n = X.shape[0]
        X = np.ascontiguousarray(X)
        self.estimators_ = []
        for _ in range(self.n_estimators):
            rows = rng.integers(0, n, size=n) if self.bootstrap else None
            tree = DecisionTreeRegressor(max_depth=self.max_depth, criterion=self.criterion)
            self.estimators_.append(tree.fit(X, y, rows=rows))
        self.n_features_in_ = X.shape[1]
        return self

    def _predict(self, X):
        preds = np.stack([t._predict(X) for t in self.estimators_])
        return preds.mean(axis=0)

    def _get_state(self):
        return {"n_features_in": self.n_features_in_, "trees": [t._get_state() for t in self.estimators_]}

    def _set_state(self, state):
        self.n_features_in_ = state["n_features_in"]
        self.estimators_ = []
        for ts in state["trees"]:
            t = DecisionTreeRegressor(max_depth=self.max_depth, criterion=self.criterion)
            t._set_state(ts)
            self.estimators_.append(t)
