"""Versioned JSON persistence of trained source models."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .gmm import GmmPrior
from .separation import MODEL_VERSION, SourceModel


def model_to_dict(model: SourceModel) -> dict:
    return {
        "version": model.version,
        "rank": model.rank,
        "frame_params": dict(model.frame_params),
        "basis": {"shape": list(model.basis.shape), "data": model.basis.ravel().tolist()},
        "gmm": {
            "k": model.prior.n_components,
            "weights": model.prior.weights.tolist(),
            "means": model.prior.means.tolist(),
            "variances": model.prior.variances.tolist(),
        },
        "floors": dict(model.floors),
        "seed": model.seed,
        "train_divergence": model.train_divergence,
    }


def model_from_dict(doc: dict) -> SourceModel:
    version = doc.get("version")
    if version != MODEL_VERSION:
        raise ValueError(f"unsupported model version {version!r}")
    shape = tuple(doc["basis"]["shape"])
    basis = np.asarray(doc["basis"]["data"], dtype=np.float64).reshape(shape)
    if shape[1] != doc["rank"]:
        raise ValueError(f"basis has {shape[1]} columns but rank is {doc['rank']}")
    if np.any(basis < 0):
        raise ValueError("basis entries must be nonnegative")
    gmm = doc["gmm"]
    prior = GmmPrior(gmm["weights"], gmm["means"], gmm["variances"])
    if prior.n_components != gmm["k"]:
        raise ValueError("gmm.k does not match the stored weights")
    return SourceModel(basis, prior, dict(doc["frame_params"]), dict(doc.get("floors", {})),
                       int(doc.get("seed", 0)), doc.get("train_divergence"), version)


def save_model(model: SourceModel, path: str | Path) -> None:
    text = json.dumps(model_to_dict(model), separators=(",", ":"))
    Path(path).write_text(text + "\n")


def load_model(path: str | Path) -> SourceModel:
    return model_from_dict(json.loads(Path(path).read_text()))
