"""Model families and their hyperparameter grids.

Family keys: dt (regression tree), rf (random forest), knn, svm (SVR),
nn (MLP), brr (Bayesian ridge), lr (linear regression).
"""

from __future__ import annotations

import itertools

from .base import Regressor
from .bayes import BayesianRidge
from .forest import RandomForestRegressor
from .knn import KNeighborsRegressor
from .linear import LinearRegression
from .mlp import MLPRegressor
from .svr import SVR
from .tree import DecisionTreeRegressor

FAMILIES: dict[str, type[Regressor]] = {
    "dt": DecisionTreeRegressor,
    "rf": RandomForestRegressor,
    "knn": KNeighborsRegressor,
    "svm": SVR,
    "nn": MLPRegressor,
    "brr": BayesianRidge,
    "lr": LinearRegression,
}

LABELS = {"dt": "DT", "rf": "RF", "knn": "KNN", "svm": "SVM", "nn": "NN", "brr": "BRR", "lr": "LR"}

# Parameter order and value order define the enumeration (and tie-break) order.
GRIDS: dict[str, dict[str, list]] = {
    "dt": {"criterion": ["mae"], "max_depth": [5, 10, 25, 50, 100]},
    "rf": {"n_estimators": [5, 10, 25, 50, 100], "max_depth": [5, 10, 15, 20], "criterion": ["mae"]},
    "knn": {"n_neighbors": [2, 5, 10], "weights": ["uniform", "distance"], "leaf_size": [5, 10, 30, 50]},
    "svm": {
        "kernel": ["linear", "poly", "rbf", "sigmoid"],
        "C": [0.1, 1.0, 5.0, 10.0],
        "gamma": ["scale", "auto"],
        "degree": [2, 3, 4, 5],
    },
    "nn": {
        "hidden_layer_sizes": [(3,), (5,), (10,), (3, 3), (5, 5), (10, 10)],
        "solver": ["sgd", "adam"],
        "learning_rate": ["constant", "invscaling", "adaptive"],
        "learning_rate_init": [0.1, 0.01, 0.001],
    },
    # alpha_1 x lambda_1, with alpha_2 = lambda_2 fixed at their defaults
    "brr": {
        "n_iter": [100, 300, 500],
        "alpha_1": [1e-6, 1e-4, 1e-2, 1, 10],
        "lambda_1": [1e-6, 1e-4, 1e-2, 1, 10],
    },
    "lr": {},
}

SEEDED = {"rf", "nn"}

# paper families in table order
DEFAULT_FAMILIES = ("dt", "rf", "knn", "svm", "brr", "lr")


def iter_grid(grid: dict[str, list]) -> list[dict]:
    """Cross product of a grid, first parameter varying slowest.  Empty grid -> [{}]."""
    names = list(grid)
    return [dict(zip(names, values)) for values in itertools.product(*(grid[k] for k in names))]


def make_model(family: str, params: dict | None = None, seed: int = 0) -> Regressor:
    if family not in FAMILIES:
        raise KeyError(f"unknown model family {family!r}; choose from {sorted(FAMILIES)}")
    kwargs = dict(params or {})
    if family in SEEDED:
        kwargs.setdefault("random_state", int(seed))
    return FAMILIES[family](**kwargs)


__all__ = [
    "BayesianRidge",
    "DecisionTreeRegressor",
    "DEFAULT_FAMILIES",
    "FAMILIES",
    "GRIDS",
    "KNeighborsRegressor",
    "LABELS",
    "LinearRegression",
    "MLPRegressor",
    "RandomForestRegressor",
    "Regressor",
    "SVR",
    "iter_grid",
    "make_model",
]
