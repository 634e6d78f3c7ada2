"""Parameter checkpoints as JSON containers.

Layout:

    {
      "format_version": 1,
      "kind": "<tagger|parser|...>",
      "params": {"<name>": {"shape": [r, c], "values": [flat row-major floats]}},
      "meta": {...}          # vocabularies, config echoes, anything JSON
    }

JSON floats are written with Python's shortest-repr, which round-trips
float64 exactly, so identical parameters produce byte-identical files.
Keys are sorted for the same reason.
"""

from __future__ import annotations

import json
from typing import Dict, Sequence, Tuple

import numpy as np

from .autodiff import Tensor

__all__ = ["FORMAT_VERSION", "CheckpointError", "save_checkpoint", "load_checkpoint"]

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for missing/unsupported format versions or malformed containers."""


def save_checkpoint(path, params: Sequence[Tensor] | Dict[str, np.ndarray],
                    kind: str, meta: dict | None = None) -> None:
    """Write named parameter arrays plus metadata to `path`."""
    if isinstance(params, dict):
        named = params
    else:
        named = {}
        for p in params:
            if not p.name:
                raise CheckpointError("cannot checkpoint an unnamed parameter")
            if p.name in named:
                raise CheckpointError(f"duplicate parameter name '{p.name}'")
            named[p.name] = p.data
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "params": {
            name: {"shape": list(arr.shape), "values": np.asarray(arr, dtype=np.float64).ravel().tolist()}
            for name, arr in named.items()
        },
        "meta": meta or {},
    }
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True, separators=(",", ":"))


def load_checkpoint(path, expect_kind: str | None = None) -> Tuple[Dict[str, np.ndarray], dict]:
    """Read a checkpoint; returns ({name: float64 array}, meta)."""
    with open(path) as f:
        doc = json.load(f)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format_version {version!r} (expected {FORMAT_VERSION})")
    if expect_kind is not None and doc.get("kind") != expect_kind:
        raise CheckpointError(f"checkpoint kind {doc.get('kind')!r}, expected {expect_kind!r}")
    params = {}
    for name, entry in doc["params"].items():
        shape = tuple(entry["shape"])
        values = np.asarray(entry["values"], dtype=np.float64)
        expected = int(np.prod(shape)) if shape else 1
        if values.size != expected:
            raise CheckpointError(f"parameter '{name}': {values.size} values for shape {shape}")
        params[name] = values.reshape(shape)
    return params, doc.get("meta", {})
