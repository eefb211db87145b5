from __future__ import annotations

import inspect

import numpy as np

from ..errors import EmptyTrainingSetError, UnfittedError, WrongDimensionError


class Regressor:
    """Common fit/predict contract for every model family.

    Hyperparameters are the keyword arguments of ``__init__`` and are stored
    under the same attribute names.  Fitted state lives in attributes with a
    trailing underscore, plus ``n_features_in_``.
    """

    family: str = ""

    def get_params(self) -> dict:
        sig = inspect.signature(type(self).__init__)
        return {name: getattr(self, name) for name in sig.parameters if name != "self"}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"

    @property
    def is_fitted(self) -> bool:
        return getattr(self, "n_features_in_", None) is not None

    def _validate_training(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[0] == 0:
            raise EmptyTrainingSetError(f"{type(self).__name__}: no training rows")
        if y.shape != (X.shape[0],):
            raise ValueError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("training data contains non-finite values")
        return X, y

    def _validate_query(self, X):
        if not self.is_fitted:
            raise UnfittedError(f"{type(self).__name__} is not fitted")
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        if single:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise WrongDimensionError(
                f"expected {self.n_features_in_} features, got shape {np.shape(X)}"
            )
        return X, single

    def fit(self, X, y) -> "Regressor":
        raise NotImplementedError

    def _predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X):
        """Predict for a 2-d batch (returns an array) or a single vector (returns a float)."""
        X, single = self._validate_query(X)
        out = self._predict(X)
        return float(out[0]) if single else out

    # serialization hooks, see models.serialize
    def _get_state(self) -> dict:
        raise NotImplementedError

    def _set_state(self, state: dict) -> None:
        raise NotImplementedError
