"""JSON model files: ``{format_version, kind, hyperparameters, parameters}``.

Floats are written with ``repr`` precision (json's default), so a save/load
round trip reproduces every coefficient bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from ..errors import ModelFormatError
from .gbt import GbtModel, RegressionTree
from .linear import LinearModel
from .svr import Kernel, SvrModel

FORMAT_VERSION = 1

RegressionModel = Union[LinearModel, SvrModel, GbtModel]


def _floats(values) -> list:
    return [float(v) for v in values]


def _encode_tree(tree: RegressionTree) -> dict:
    return {
        "threshold": [None if np.isnan(v) else float(v) for v in tree.threshold],
        "left": [int(v) for v in tree.left],
        "right": [int(v) for v in tree.right],
        "value": _floats(tree.value),
    }


def _decode_tree(node: dict) -> RegressionTree:
    threshold = np.array([np.nan if v is None else float(v) for v in node["threshold"]])
    left = np.array(node["left"], dtype=int)
    right = np.array(node["right"], dtype=int)
    value = np.array(node["value"], dtype=float)
    n = len(left)
    if not (len(threshold) == len(right) == len(value) == n) or n == 0:
        raise ModelFormatError("tree arrays have inconsistent lengths")
    internal = left >= 0
    if np.any(internal != (right >= 0)) or np.any(left[internal] >= n) or np.any(right[internal] >= n):
        raise ModelFormatError("tree has a node with a dangling child")
    if not np.all(np.isfinite(threshold[internal])) or not np.all(np.isfinite(value)):
        raise ModelFormatError("tree has non-finite thresholds or leaf values")
    return RegressionTree(threshold, left, right, value)


def model_to_dict(model: RegressionModel) -> dict:
    if isinstance(model, LinearModel):
        hyper, params = {}, {"slope": model.slope, "intercept": model.intercept}
    elif isinstance(model, SvrModel):
        hyper = {"c": model.c, "epsilon": model.epsilon, "gamma": model.gamma,
                 "kernel": model.kernel.value}
        params = {"support_x": _floats(model.support_x), "dual_coefs": _floats(model.dual_coefs),
                  "bias": model.bias, "x_mean": model.x_mean, "x_std": model.x_std,
                  "converged": bool(model.converged), "kkt_violation": float(model.kkt_violation),
                  "iterations": int(model.iterations)}
    elif isinstance(model, GbtModel):
        hyper = {"rounds": len(model.trees), "learning_rate": model.learning_rate,
                 "lambda": model.lam, "max_depth": model.max_depth,
                 "min_child_count": model.min_child_count, "min_split_gain": model.min_split_gain}
        params = {"base_score": model.base_score,
                  "trees": [_encode_tree(t) for t in model.trees],
                  "train_rmse": _floats(model.train_rmse)}
    else:
        raise TypeError(f"not a regression model: {type(model).__name__}")
    return {"format_version": FORMAT_VERSION, "kind": model.kind,
            "hyperparameters": hyper, "parameters": params}


def model_from_dict(doc: dict, expected_kind: str | None = None) -> RegressionModel:
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format_version {version!r}")
    kind = doc.get("kind")
    if expected_kind is not None and kind != expected_kind:
        raise ModelFormatError(f"expected a {expected_kind!r} model, file holds {kind!r}")
    try:
        hyper, p = doc["hyperparameters"], doc["parameters"]
        if kind == "lr":
            return LinearModel(float(p["slope"]), float(p["intercept"]))
        if kind == "svr":
            support = np.array(p["support_x"], dtype=float)
            duals = np.array(p["dual_coefs"], dtype=float)
            if support.shape != duals.shape:
                raise ModelFormatError("support_x and dual_coefs differ in length")
            return SvrModel(support_x=support, dual_coefs=duals, bias=float(p["bias"]),
                            gamma=float(hyper["gamma"]), epsilon=float(hyper["epsilon"]),
                            c=float(hyper["c"]), x_mean=float(p["x_mean"]),
                            x_std=float(p["x_std"]), kernel=Kernel(hyper["kernel"]),
                            converged=bool(p.get("converged", True)),
                            kkt_violation=float(p.get("kkt_violation", 0.0)),
                            iterations=int(p.get("iterations", 0)))
        if kind == "gbt":
            trees = tuple(_decode_tree(t) for t in p["trees"])
            return GbtModel(base_score=float(p["base_score"]), trees=trees,
                            learning_rate=float(hyper["learning_rate"]), lam=float(hyper["lambda"]),
                            max_depth=int(hyper["max_depth"]),
                            min_child_count=int(hyper["min_child_count"]),
                            min_split_gain=float(hyper["min_split_gain"]),
                            train_rmse=tuple(float(v) for v in p.get("train_rmse", ())))
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed {kind} model: {exc!r}") from None
    raise ModelFormatError(f"unknown model kind {kind!r}")


def save_model(model: RegressionModel, path, provenance: dict | None = None) -> None:
    doc = model_to_dict(model)
    if provenance is not None:
        doc["provenance"] = provenance
    Path(path).write_text(json.dumps(doc, indent=1, allow_nan=False) + "\n", encoding="utf-8")


def load_model_document(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: not a valid model file ({exc})") from None


def load_model(path, expected_kind: str | None = None) -> RegressionModel:
    return model_from_dict(load_model_document(path), expected_kind)


def predict(model: RegressionModel, time_s):
    return model.predict(time_s)
