"""Streaming memory banks for camera-conditioned video features.

The pipeline calibrates each frame's visual tokens with camera-guided
geometry, keeps a short sliding window of dense recent features, and keeps
a fixed-capacity bank of pooled long-range evidence scored by question
relevance times novelty. Both memories are read before they are written,
and their readouts are gated back into the frame feature.
"""

from .config import ConfigError, Dims, RunConfig, ScenarioConfig
from .context_bank import ContextBank, ContextBankParams, ContextEntry, camera_delta_signals
from .evidence_bank import (
    EvidenceBank,
    EvidenceBankParams,
    EvidenceEntry,
    WriteOutcome,
    entry_similarity,
    evidence_score,
    novelty_score,
    pool_entry,
    refresh_novelty,
    relevance_score,
)
from .geometry_fusion import (
    CalibratedFrame,
    FrameInputs,
    GeometryFusionParams,
    camera_channel_gate,
    fuse_geometry,
    geometry_bias_gate,
    geometry_residual,
)
from .kernels import (
    Mlp,
    attention,
    cosine_similarity,
    grid_pool,
    mean_pool_tokens,
    mlp_forward,
    scaled_dot_attention,
    softmax_rows,
)
from .metrics import recall_at_capacity, redundancy
from .params import init_bundle, make_mlp
from .pipeline import (
    POLICY_NAMES,
    FusionParams,
    ParamsBundle,
    PipelineState,
    StepRecord,
    Toggles,
    WritePolicy,
    adaptive_fuse,
    resolve_policy,
    step,
)
from .runner import RunReport, run_steps, run_stream
from .snapshot import SnapshotError, snapshot_load, snapshot_save
from .synthetic import (
    FrameSpec,
    Scenario,
    decode_camera,
    embed_frame,
    encode_camera,
    gen_scenario,
    gen_separable_scenario,
    question_vector,
    semantic_embedding,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
