"""Independent brute-force recomputations used to cross-check the pipeline.

Everything here is written directly from the definitions — explicit loops,
inline softmax, no reuse of the production kernels — so agreement with the
main implementation is evidence, not tautology.
"""

from __future__ import annotations

import math

import numpy as np


def _softmax_matrix(scores: np.ndarray) -> np.ndarray:
    out = np.empty_like(scores, dtype=np.float64)
    for i in range(scores.shape[0]):
        row = scores[i]
        shifted = [math.exp(v - max(row)) for v in row]
        total = sum(shifted)
        out[i] = [v / total for v in shifted]
    return out


def unmodulated_read(query_tokens, memory_blocks, w_q, w_k, w_v) -> np.ndarray:
    """Plain cross-attention over concatenated memory blocks."""
    q = np.asarray(query_tokens, dtype=np.float64) @ np.asarray(w_q, dtype=np.float64)
    keys = np.concatenate([np.asarray(b, dtype=np.float64) @ w_k for b in memory_blocks])
    values = np.concatenate([np.asarray(b, dtype=np.float64) @ w_v for b in memory_blocks])
    scores = q @ keys.T / math.sqrt(q.shape[1])
    return _softmax_matrix(scores) @ values


def modulated_read(query_tokens, memory_blocks, key_biases, value_gates,
                   w_q, w_k, w_v) -> np.ndarray:
    """Cross-attention with per-block scalar key bias and value gate."""
    q = np.asarray(query_tokens, dtype=np.float64) @ np.asarray(w_q, dtype=np.float64)
    key_rows, value_rows = [], []
    for block, bias, gate in zip(memory_blocks, key_biases, value_gates):
        block = np.asarray(block, dtype=np.float64)
        for row in block @ w_k:
            key_rows.append(row + bias)
        for row in block @ w_v:
            value_rows.append(row * gate)
    keys = np.asarray(key_rows)
    values = np.asarray(value_rows)
    scores = q @ keys.T / math.sqrt(q.shape[1])
    return _softmax_matrix(scores) @ values


def _cos(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1).tolist()
    b = np.asarray(b, dtype=np.float64).reshape(-1).tolist()
    na = math.sqrt(math.fsum(v * v for v in a))
    nb = math.sqrt(math.fsum(v * v for v in b))
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    if a == b:
        return 1.0  # exact self-similarity, matching the definition
    c = math.fsum(x * y for x, y in zip(a, b)) / (na * nb)
    return max(-1.0, min(1.0, c))


def entry_sim(a, b, sim_mode: str = "pooled_mean") -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if sim_mode == "pooled_mean":
        cos = _cos(a.sum(axis=0) / a.shape[0], b.sum(axis=0) / b.shape[0])
    elif sim_mode == "per_token":
        cos = sum(_cos(a[i], b[i]) for i in range(a.shape[0])) / a.shape[0]
    else:
        raise ValueError(f"unknown sim_mode {sim_mode!r}")
    return (cos + 1.0) / 2.0


def refreshed_novelties(pooled_list, lambda_nu: float, sim_mode: str = "pooled_mean",
                        forced_novelty: float | None = None) -> list[float]:
    """Leave-one-out novelty for every member of a pooled-entry list."""
    if forced_novelty is not None:
        return [forced_novelty] * len(pooled_list)
    out = []
    for i, cand in enumerate(pooled_list):
        best = None
        for j, other in enumerate(pooled_list):
            if i == j:
                continue
            s = entry_sim(cand, other, sim_mode)
            if best is None or s > best:
                best = s
        out.append(lambda_nu if best is None else lambda_nu * (1.0 - best))
    return out


def eviction_decision(stored, candidate, lambda_nu: float,
                      sim_mode: str = "pooled_mean",
                      forced_novelty: float | None = None):
    """Recompute a full-bank write from scratch.

    ``stored`` and ``candidate`` are (frame_index, pooled, relevance)
    triples. Returns (evicted_frame_index, refreshed survivor table) where
    the table maps frame_index -> (novelty, score). Eviction takes the
    minimum relevance*novelty over bank-plus-candidate, oldest frame first
    on ties; evicting the candidate itself means rejection.
    """
    pool = list(stored) + [candidate]
    novelties = refreshed_novelties([p[1] for p in pool], lambda_nu, sim_mode, forced_novelty)
    best_idx = None
    best_key = None
    for (frame, _, rel), nu in zip(pool, novelties):
        key = (rel * nu, frame)
        if best_key is None or key < best_key:
            best_key = key
            best_idx = frame
    survivors = [p for p in pool if p[0] != best_idx]
    refreshed = refreshed_novelties([p[1] for p in survivors], lambda_nu, sim_mode,
                                    forced_novelty)
    table = {p[0]: (nu, p[2] * nu) for p, nu in zip(survivors, refreshed)}
    return best_idx, table


def below_capacity_refresh(stored, candidate, lambda_nu: float,
                           sim_mode: str = "pooled_mean",
                           forced_novelty: float | None = None):
    """Recompute a sub-capacity write: append, then refresh everything."""
    pool = list(stored) + [candidate]
    refreshed = refreshed_novelties([p[1] for p in pool], lambda_nu, sim_mode, forced_novelty)
    return {p[0]: (nu, p[2] * nu) for p, nu in zip(pool, refreshed)}


def geometry_fusion_reference(inputs, p) -> np.ndarray:
    """Monolithic re-computation of the full camera-guided fusion."""
    f_v = np.asarray(inputs.visual, dtype=np.float64)
    f_g = np.asarray(inputs.geometry, dtype=np.float64)
    f_c = np.asarray(inputs.camera, dtype=np.float64)

    # Inline everything rather than share helpers with the implementation.
    def sigmoid(x):
        return 1.0 / (1.0 + np.exp(-x))

    def run_mlp(mp, x):
        h = x
        for i, (w, b) in enumerate(zip(mp.weights, mp.biases)):
            h = h @ w + b
            act = mp.hidden_activation if i < len(mp.weights) - 1 else mp.output_activation
            if act == "silu":
                h = h * sigmoid(h)
            elif act == "sigmoid":
                h = sigmoid(h)
        return h

    g = f_g @ p.proj_g
    cam = np.repeat(f_c @ p.proj_c, f_g.shape[0], axis=0)
    bias = run_mlp(p.mlp_bias, np.concatenate([g, cam], axis=1))
    gate = run_mlp(p.mlp_gate, g)

    q = f_v @ p.proj_q
    k = g @ p.proj_k + bias
    v = (g @ p.proj_v + bias) * gate
    scores = q @ k.T / math.sqrt(q.shape[1])
    residual = _softmax_matrix(scores) @ v

    z = f_c @ p.proj_camera_gate
    half = z.shape[1] // 2
    a, b = z[:, :half], z[:, half:]
    g_c = a * (b * sigmoid(b))
    return f_v + g_c * (residual @ p.proj_o)


def adaptive_fusion_reference(feature, r_context, r_evidence, p) -> np.ndarray:
    """Monolithic re-computation of the gated fusion of both readouts."""
    feature = np.asarray(feature, dtype=np.float64)

    def sigmoid(x):
        return 1.0 / (1.0 + np.exp(-x))

    def run_mlp(mp, x):
        h = x
        for i, (w, b) in enumerate(zip(mp.weights, mp.biases)):
            h = h @ w + b
            act = mp.hidden_activation if i < len(mp.weights) - 1 else mp.output_activation
            if act == "silu":
                h = h * sigmoid(h)
            elif act == "sigmoid":
                h = sigmoid(h)
        return h

    bars = np.concatenate(
        [
            feature.mean(axis=0, keepdims=True),
            np.asarray(r_context).mean(axis=0, keepdims=True),
            np.asarray(r_evidence).mean(axis=0, keepdims=True),
        ],
        axis=1,
    )
    g_c = run_mlp(p.mlp_gate_context, bars)
    g_e = run_mlp(p.mlp_gate_evidence, bars)
    return feature + g_c * np.asarray(r_context) + g_e * np.asarray(r_evidence)
