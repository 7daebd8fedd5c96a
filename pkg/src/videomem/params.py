"""Deterministic parameter initialization.

The reference system learns these projections; here they are fixed at
seeded values so the whole pipeline is a pure function of (seed, config).
Every tensor is drawn from its own named Philox stream with fan-in-bounded
uniform weights.
"""

from __future__ import annotations

from .config import Dims
from .context_bank import ContextBankParams
from .evidence_bank import EvidenceBankParams
from .geometry_fusion import GeometryFusionParams
from .kernels import Mlp
from .pipeline import FusionParams, ParamsBundle
from .rng import uniform_fan_in


def _proj(seed, path, in_dim, out_dim):
    return uniform_fan_in(seed, path, (in_dim, out_dim), fan_in=in_dim)


def make_mlp(seed, path, in_dim, out_dim, output_activation="none") -> Mlp:
    """Two-layer MLP, hidden width = input width, SiLU between layers."""
    hidden = in_dim
    return Mlp(
        weights=(
            uniform_fan_in(seed, (*path, "w1"), (in_dim, hidden), fan_in=in_dim),
            uniform_fan_in(seed, (*path, "w2"), (hidden, out_dim), fan_in=hidden),
        ),
        biases=(
            uniform_fan_in(seed, (*path, "b1"), (hidden,), fan_in=in_dim),
            uniform_fan_in(seed, (*path, "b2"), (out_dim,), fan_in=hidden),
        ),
        hidden_activation="silu",
        output_activation=output_activation,
    )


def init_bundle(seed: int, dims: Dims) -> ParamsBundle:
    """Full deterministic parameter bundle for every pipeline stage."""
    d, d_g = dims.feature_dim, dims.geom_dim
    geometry = GeometryFusionParams(
        proj_g=_proj(seed, ("geometry", "proj_g"), d_g, d),
        proj_c=_proj(seed, ("geometry", "proj_c"), d_g, d),
        mlp_bias=make_mlp(seed, ("geometry", "mlp_bias"), 2 * d, d),
        mlp_gate=make_mlp(seed, ("geometry", "mlp_gate"), d, 1, "sigmoid"),
        proj_q=_proj(seed, ("geometry", "proj_q"), d, d),
        proj_k=_proj(seed, ("geometry", "proj_k"), d, d),
        proj_v=_proj(seed, ("geometry", "proj_v"), d, d),
        proj_o=_proj(seed, ("geometry", "proj_o"), d, d),
        proj_camera_gate=_proj(seed, ("geometry", "proj_camera_gate"), d_g, 2 * d),
    )
    context = ContextBankParams(
        mlp_key_bias=make_mlp(seed, ("context", "mlp_key_bias"), d_g, 1),
        mlp_value_gate=make_mlp(seed, ("context", "mlp_value_gate"), d_g, 1, "sigmoid"),
        proj_q=_proj(seed, ("context", "proj_q"), d, d),
        proj_k=_proj(seed, ("context", "proj_k"), d, d),
        proj_v=_proj(seed, ("context", "proj_v"), d, d),
    )
    evidence = EvidenceBankParams(
        proj_q=_proj(seed, ("evidence", "proj_q"), d, d),
        proj_k=_proj(seed, ("evidence", "proj_k"), d, d),
        proj_v=_proj(seed, ("evidence", "proj_v"), d, d),
        pool_h=dims.pool_h,
        pool_w=dims.pool_w,
    )
    fusion = FusionParams(
        mlp_gate_context=make_mlp(seed, ("fusion", "gate_context"), 3 * d, d, "sigmoid"),
        mlp_gate_evidence=make_mlp(seed, ("fusion", "gate_evidence"), 3 * d, d, "sigmoid"),
    )
    return ParamsBundle(geometry=geometry, context=context, evidence=evidence, fusion=fusion)
