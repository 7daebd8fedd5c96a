"""Deterministic splittable random streams.

Every random draw in the package flows through :func:`stream`, a Philox
(counter-based) generator keyed by a 64-bit seed plus a path of labels.
Distinct paths give independent streams; the same (seed, path) always
yields the same sequence on any platform with IEEE-754 doubles.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np


def stream(seed: int, *path: object) -> np.random.Generator:
    """Return a generator keyed by ``seed`` and a label path."""
    h = hashlib.sha256(str(int(seed)).encode("ascii"))
    for part in path:
        h.update(b"/")
        h.update(repr(part).encode("utf-8"))
    key = int.from_bytes(h.digest()[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


def uniform_fan_in(seed: int, path: tuple, shape: tuple, fan_in: int) -> np.ndarray:
    """Draw weights uniformly in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    bound = 1.0 / math.sqrt(fan_in)
    w = stream(seed, *path).uniform(-bound, bound, size=shape)
    w.setflags(write=False)
    return w
