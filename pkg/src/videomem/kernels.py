"""Dense real-matrix kernels shared by every stage of the pipeline.

Tokens are rows of plain 2-D float64 ``numpy`` arrays. Everything here is a
pure function of its arguments; nothing owns state or mutates an input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Matrix = np.ndarray


def as_matrix(values, name: str = "matrix") -> Matrix:
    """Coerce to a finite float64 2-D array, raising on anything else."""
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError(f"{name} contains non-finite values")
    return m


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def silu(x):
    x = np.asarray(x, dtype=np.float64)
    return x * sigmoid(x)


_ACTIVATIONS = {
    "none": lambda x: x,
    "sigmoid": sigmoid,
    "silu": silu,
}


@dataclass(frozen=True)
class Mlp:
    """A stack of affine layers interleaved with a hidden activation.

    ``weights[i]`` has shape (in_i, out_i) and ``biases[i]`` shape (out_i,);
    each layer's out-dim must equal the next layer's in-dim. The hidden
    activation is applied after every layer except the last, which gets
    ``output_activation`` ("none" or "sigmoid").
    """

    weights: tuple[Matrix, ...]
    biases: tuple[Matrix, ...]
    hidden_activation: str = "silu"
    output_activation: str = "none"

    def __post_init__(self):
        if not self.weights or len(self.weights) != len(self.biases):
            raise ValueError("need one bias per weight matrix, at least one layer")
        ws, bs = [], []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = as_matrix(w, f"layer {i} weights")
            b = np.asarray(b, dtype=np.float64).reshape(-1)
            if not np.isfinite(b).all():
                raise ValueError(f"layer {i} bias contains non-finite values")
            if b.shape[0] != w.shape[1]:
                raise ValueError(f"layer {i}: bias width {b.shape[0]} != out dim {w.shape[1]}")
            if i > 0 and w.shape[0] != ws[i - 1].shape[1]:
                raise ValueError(
                    f"layer {i}: in dim {w.shape[0]} does not chain from "
                    f"previous out dim {ws[i - 1].shape[1]}"
                )
            w.setflags(write=False)
            b.setflags(write=False)
            ws.append(w)
            bs.append(b)
        for name in (self.hidden_activation, self.output_activation):
            if name not in _ACTIVATIONS:
                raise ValueError(f"unknown activation {name!r}")
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]


def mlp_forward(p: Mlp, x: Matrix) -> Matrix:
    """Apply the MLP row-wise to a (N, in_dim) token matrix."""
    x = as_matrix(x, "mlp input")
    last = len(p.weights) - 1
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        if x.shape[1] != w.shape[0]:
            raise ValueError(f"layer {i} expects {w.shape[0]} columns, got {x.shape[1]}")
        x = x @ w + b
        act = p.hidden_activation if i < last else p.output_activation
        x = _ACTIVATIONS[act](x)
    return x


def softmax_rows(m: Matrix) -> Matrix:
    """Row-wise softmax with per-row max subtraction for stability."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("empty input")
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def scaled_dot_attention(q: Matrix, k: Matrix, v: Matrix) -> Matrix:
    """softmax(q k^T / sqrt(d)) v, single head.

    q is (n_q, d); k and v share n_k rows. Callers are expected to handle
    empty memories before getting here.
    """
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if k.shape[0] == 0:
        raise ValueError("empty key set")
    if q.shape[1] != k.shape[1]:
        raise ValueError(f"query width {q.shape[1]} != key width {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise ValueError(f"{k.shape[0]} keys but {v.shape[0]} values")
    scores = (q @ k.T) / math.sqrt(q.shape[1])
    return softmax_rows(scores) @ v


def attention(q: Matrix, k: Matrix, v: Matrix, head_count: int = 1) -> Matrix:
    """Scaled dot attention, optionally channel-split into equal heads."""
    if head_count == 1:
        return scaled_dot_attention(q, k, v)
    d = q.shape[1]
    if head_count < 1 or d % head_count != 0:
        raise ValueError(f"head_count {head_count} must divide width {d}")
    step = d // head_count
    parts = [
        scaled_dot_attention(q[:, i : i + step], k[:, i : i + step], v[:, i : i + step])
        for i in range(0, d, step)
    ]
    return np.concatenate(parts, axis=1)


def cosine_similarity(a, b) -> float:
    """Cosine of two equal-length vectors, clamped to [-1, 1].

    A vector with norm below 1e-12 carries no direction; similarity against
    it is defined as 0.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    if np.array_equal(a, b):
        return 1.0  # self-similarity must be exact, not 1 - 1ulp
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


def mean_pool_tokens(x: Matrix) -> Matrix:
    """Column-wise mean over tokens, returned as a 1-row matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("empty token set")
    return x.mean(axis=0, keepdims=True)


def grid_pool(x: Matrix, grid_h: int, grid_w: int, out_h: int, out_w: int) -> Matrix:
    """Adaptive average pooling of a (grid_h*grid_w, d) token grid.

    Tokens are laid out row-major over the grid. Output cell (i, j) is the
    mean of the block of input cells with row range
    [floor(i*H/out_h), floor((i+1)*H/out_h)) and the analogous column range;
    the blocks partition the grid.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != grid_h * grid_w:
        raise ValueError(
            f"expected {grid_h * grid_w} tokens for a {grid_h}x{grid_w} grid, got {x.shape[0]}"
        )
    if not (1 <= out_h <= grid_h and 1 <= out_w <= grid_w):
        raise ValueError(f"output grid {out_h}x{out_w} exceeds input grid {grid_h}x{grid_w}")
    g = x.reshape(grid_h, grid_w, x.shape[1])
    rb = [(i * grid_h) // out_h for i in range(out_h + 1)]
    cb = [(j * grid_w) // out_w for j in range(out_w + 1)]
    out = np.empty((out_h * out_w, x.shape[1]), dtype=np.float64)
    for i in range(out_h):
        for j in range(out_w):
            block = g[rb[i] : rb[i + 1], cb[j] : cb[j + 1]]
            out[i * out_w + j] = block.mean(axis=(0, 1))
    return out
