"""Model weight files: JSON header plus one flat weight array.

Floats are written with ``repr`` semantics (shortest round-trip
decimal), so save/load is value-exact for float64.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import FormatError
from ..graph import check_format_version
from .models import MODEL_CLASSES, NextEdgeModel

WEIGHTS_FORMAT_VERSION = 1


def model_to_dict(model: NextEdgeModel) -> dict:
    order = list(model.param_names)
    flat = np.concatenate([model.params[k].reshape(-1) for k in order]) if order else np.zeros(0)
    if not np.all(np.isfinite(flat)):
        raise FormatError("refusing to save non-finite weights")
    return {
        "format_version": WEIGHTS_FORMAT_VERSION,
        "model_kind": model.kind,
        "seed": model.meta.get("seed"),
        "window": model.window,
        "order": order,
        "shapes": model.shapes(),
        "meta": model.meta,
        "weights": [float(x) for x in flat],
    }


def model_from_dict(doc: dict) -> NextEdgeModel:
    if not isinstance(doc, dict):
        raise FormatError("weights document must be an object")
    check_format_version(doc, "weights", WEIGHTS_FORMAT_VERSION)
    try:
        cls = MODEL_CLASSES[doc["model_kind"]]
        order = doc["order"]
        shapes = doc["shapes"]
        flat = np.asarray(doc["weights"], dtype=float)
        params = {}
        pos = 0
        for name in order:
            shape = tuple(shapes[name])
            size = int(np.prod(shape)) if shape else 1
            params[name] = flat[pos:pos + size].reshape(shape).copy()
            pos += size
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed weights document: {exc!r}") from exc
    if pos != flat.size:
        raise FormatError(f"weights length {flat.size} does not match declared shapes ({pos})")
    return cls(params, window=int(doc.get("window", 1)), meta=doc.get("meta") or {})


def save_model(model: NextEdgeModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)) + "\n", encoding="utf-8")


def load_model(path) -> NextEdgeModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(doc)
