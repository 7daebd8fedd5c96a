"""Canonical JSON: sorted keys, no whitespace, explicit float formatting.

Reports format floats to 9 significant digits; snapshots use shortest
round-trip ``repr`` so reloading restores every bit. Non-finite floats are
rejected outright — nothing in the pipeline may produce them.
"""

from __future__ import annotations

import json
import math

import numpy as np


def canonical_dumps(obj, *, float_repr: bool = False) -> str:
    fmt = repr if float_repr else lambda x: format(x, ".9g")

    def emit(o) -> str:
        if o is None:
            return "null"
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            x = float(o)
            if not math.isfinite(x):
                raise ValueError("non-finite float in canonical JSON")
            return fmt(x)
        if isinstance(o, str):
            return json.dumps(o, ensure_ascii=True)
        if isinstance(o, (list, tuple)):
            return "[" + ",".join(emit(v) for v in o) + "]"
        if isinstance(o, np.ndarray):
            return emit(o.tolist())
        if isinstance(o, dict):
            if any(not isinstance(k, str) for k in o):
                raise TypeError("canonical JSON requires string keys")
            items = (f"{json.dumps(k, ensure_ascii=True)}:{emit(v)}" for k, v in sorted(o.items()))
            return "{" + ",".join(items) + "}"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return emit(obj)


def canonical_bytes(obj, *, float_repr: bool = False) -> bytes:
    return (canonical_dumps(obj, float_repr=float_repr) + "\n").encode("utf-8")


def matrix_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=np.float64)
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]), "data": m.reshape(-1).tolist()}


def matrix_from_json(obj: dict, name: str = "matrix") -> np.ndarray:
    for key in ("rows", "cols", "data"):
        if key not in obj:
            raise ValueError(f"{name}: missing field {key!r}")
    rows, cols, data = obj["rows"], obj["cols"], obj["data"]
    if rows * cols != len(data):
        raise ValueError(f"{name}: {rows}x{cols} does not match {len(data)} values")
    return np.asarray(data, dtype=np.float64).reshape(rows, cols)
