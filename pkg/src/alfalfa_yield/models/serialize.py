"""Versioned JSON form of fitted models, for reproducibility audits.

Floats are written with ``repr`` precision by the json module, so
dump -> load -> dump is byte-stable and predictions are bit-identical.
"""

from __future__ import annotations

import json

from ..errors import UnfittedError
from . import FAMILIES, Regressor

FORMAT = "alfalfa-yield-model"
VERSION = 1


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


def to_dict(model: Regressor, seed: int | None = None) -> dict:
    if not model.is_fitted:
        raise UnfittedError("cannot serialize an unfitted model")
    params = {k: _jsonable(v) for k, v in model.get_params().items()}
    if seed is None:
        seed = params.get("random_state")
    return {
        "format": FORMAT,
        "version": VERSION,
        "family": model.family,
        "params": params,
        "seed": seed,
        "state": model._get_state(),
    }


def from_dict(doc: dict) -> Regressor:
    if doc.get("format") != FORMAT:
        raise ValueError(f"not a serialized model (format={doc.get('format')!r})")
    if doc.get("version") != VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')!r}")
    params = dict(doc["params"])
    if "hidden_layer_sizes" in params:
        h = params["hidden_layer_sizes"]
        params["hidden_layer_sizes"] = tuple(h) if isinstance(h, list) else h
    model = FAMILIES[doc["family"]](**params)
    model._set_state(doc["state"])
    return model


def dumps(model: Regressor, seed: int | None = None) -> str:
    return json.dumps(to_dict(model, seed), sort_keys=True, indent=1)


def loads(text: str) -> Regressor:
    return from_dict(json.loads(text))
