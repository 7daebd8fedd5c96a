"""Per-frame orchestration: fuse, read both banks, adapt, then write.

The step order is part of the contract and is what the ordering tests pin
down: (1) geometry fusion, (2) context-window read, (3) evidence-bank
read, (4) adaptive fusion of the readouts into the frame feature,
(5) context-window write, (6) evidence-bank scoring and write. Reads only
ever see frames strictly older than the one being processed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .context_bank import ContextBank, ContextBankParams
from .evidence_bank import (
    EvidenceBank,
    EvidenceBankParams,
    EvidenceEntry,
    WriteOutcome,
    evidence_score,
    novelty_score,
    pool_entry,
    relevance_score,
)
from .geometry_fusion import CalibratedFrame, FrameInputs, GeometryFusionParams, fuse_geometry
from .kernels import Matrix, Mlp, as_matrix, mean_pool_tokens, mlp_forward


@dataclass(frozen=True)
class FusionParams:
    """Two sigmoid gate MLPs (3d -> d), one per memory readout."""

    mlp_gate_context: Mlp
    mlp_gate_evidence: Mlp

    def __post_init__(self):
        for name in ("mlp_gate_context", "mlp_gate_evidence"):
            m = getattr(self, name)
            if m.output_activation != "sigmoid":
                raise ValueError(f"{name} needs a sigmoid output")
            if m.in_dim != 3 * m.out_dim:
                raise ValueError(f"{name} must map 3d -> d")


def adaptive_fuse(feature: Matrix, context_readout: Matrix, evidence_readout: Matrix,
                  p: FusionParams):
    """Gate both readouts into the frame feature.

    The gates are sigmoid MLPs over the channel concatenation of the three
    token-mean summaries and are broadcast over tokens. Returns
    (fused, context_gate, evidence_gate); the gates are (1, d).
    """
    feature = as_matrix(feature, "frame feature")
    context_readout = as_matrix(context_readout, "context readout")
    evidence_readout = as_matrix(evidence_readout, "evidence readout")
    if feature.shape != context_readout.shape or feature.shape != evidence_readout.shape:
        raise ValueError("feature and readouts must share a shape")
    summary = np.concatenate(
        [
            mean_pool_tokens(feature),
            mean_pool_tokens(context_readout),
            mean_pool_tokens(evidence_readout),
        ],
        axis=1,
    )
    gate_c = mlp_forward(p.mlp_gate_context, summary)
    gate_e = mlp_forward(p.mlp_gate_evidence, summary)
    fused = feature + gate_c * context_readout + gate_e * evidence_readout
    return fused, gate_c, gate_e


@dataclass(frozen=True)
class ParamsBundle:
    geometry: GeometryFusionParams
    context: ContextBankParams
    evidence: EvidenceBankParams
    fusion: FusionParams


@dataclass(frozen=True)
class Toggles:
    """Component switches mirroring the ablation axes."""

    geometry_fusion: bool = True
    context_bank: bool = True
    evidence_bank: bool = True
    camera_delta: bool = True


@dataclass(frozen=True)
class WritePolicy:
    """How candidate scores are formed and how eviction works.

    ``forced_relevance`` / ``forced_novelty`` pin the respective signal
    instead of computing it; ``chronological`` replaces score-based
    eviction with oldest-out replacement.
    """

    name: str
    forced_relevance: float | None = None
    forced_novelty: float | None = None
    chronological: bool = False


def _policies(lambda_r: float, lambda_nu: float) -> dict[str, WritePolicy]:
    return {
        "scored": WritePolicy("scored"),
        "relevance_only": WritePolicy("relevance_only", forced_novelty=lambda_nu),
        "novelty_only": WritePolicy("novelty_only", forced_relevance=lambda_r),
        "no_bias": WritePolicy("no_bias", forced_relevance=1.0, forced_novelty=1.0),
        "fifo": WritePolicy("fifo", forced_relevance=1.0, forced_novelty=1.0,
                            chronological=True),
    }


POLICY_NAMES = ("scored", "fifo", "relevance_only", "novelty_only", "no_bias")


def resolve_policy(name: str, lambda_r: float, lambda_nu: float) -> WritePolicy:
    table = _policies(lambda_r, lambda_nu)
    if name not in table:
        raise ValueError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")
    return table[name]


@dataclass(frozen=True)
class StepTensors:
    """Full intermediate tensors, kept only when a step is run verbosely."""

    calibrated: Matrix
    context_readout: Matrix
    evidence_readout: Matrix
    fused: Matrix
    candidate_pooled: Matrix | None


@dataclass(frozen=True)
class StepRecord:
    """Per-step diagnostics; score fields are None when the bank is off."""

    frame_index: int
    relevance: float | None
    novelty: float | None
    score: float | None
    write_outcome: WriteOutcome | None
    gate_context_mean: float
    gate_evidence_mean: float
    fused_checksum: float
    context_read_indices: tuple[int, ...]
    evidence_read_indices: tuple[int, ...]
    tensors: StepTensors | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class PipelineState:
    """Both banks plus the step counter and the pooled question vector."""

    context_bank: ContextBank
    evidence_bank: EvidenceBank
    step: int
    question_pooled: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.question_pooled, dtype=np.float64).reshape(-1)
        q.setflags(write=False)
        object.__setattr__(self, "question_pooled", q)

    @classmethod
    def initial(cls, tau: int, capacity: int, question_pooled,
                lambda_r: float = 1.0, lambda_nu: float = 1.0,
                sim_mode: str = "pooled_mean") -> "PipelineState":
        return cls(
            context_bank=ContextBank.empty(tau),
            evidence_bank=EvidenceBank.empty(capacity, lambda_r, lambda_nu, sim_mode),
            step=0,
            question_pooled=question_pooled,
        )


def step(state: PipelineState, inputs: FrameInputs, frame_semantic, bundle: ParamsBundle,
         policy: WritePolicy | None = None, toggles: Toggles = Toggles(),
         collect_tensors: bool = False,
         evict_newest_on_tie: bool = False):
    """Process one frame; returns (new_state, fused_tokens, record).

    ``frame_semantic`` is the frame's semantic embedding used for question
    relevance (computed from the raw visual stream, never from the
    calibrated feature). Frames must arrive in order: frame_index must be
    state.step + 1.
    """
    if inputs.frame_index != state.step + 1:
        raise ValueError(
            f"out-of-order frame index {inputs.frame_index}; expected {state.step + 1}"
        )
    if policy is None:
        policy = resolve_policy("scored", state.evidence_bank.lambda_r,
                                state.evidence_bank.lambda_nu)

    if toggles.geometry_fusion:
        frame = fuse_geometry(inputs, bundle.geometry)
    else:
        frame = CalibratedFrame(
            feature=inputs.visual,
            camera=inputs.camera,
            frame_index=inputs.frame_index,
            grid_h=inputs.grid_h,
            grid_w=inputs.grid_w,
        )

    context_indices = state.context_bank.frame_indices() if toggles.context_bank else ()
    if toggles.context_bank:
        r_context = state.context_bank.read(
            frame.feature, frame.camera, bundle.context, modulated=toggles.camera_delta
        )
    else:
        r_context = np.zeros_like(frame.feature)

    evidence_indices = state.evidence_bank.frame_indices() if toggles.evidence_bank else ()
    if toggles.evidence_bank:
        r_evidence = state.evidence_bank.read(frame.feature, bundle.evidence)
    else:
        r_evidence = np.zeros_like(frame.feature)

    fused, gate_c, gate_e = adaptive_fuse(frame.feature, r_context, r_evidence, bundle.fusion)

    new_context = state.context_bank
    if toggles.context_bank:
        new_context = state.context_bank.write(frame.feature, frame.camera, frame.frame_index)

    new_evidence = state.evidence_bank
    relevance = novelty = score = None
    outcome: WriteOutcome | None = None
    candidate_pooled = None
    if toggles.evidence_bank:
        bank = state.evidence_bank
        candidate_pooled = pool_entry(frame.feature, frame.grid_h, frame.grid_w,
                                      bundle.evidence)
        if policy.forced_relevance is not None:
            relevance = policy.forced_relevance
        else:
            relevance = relevance_score(frame_semantic, state.question_pooled, bank.lambda_r)
        if policy.forced_novelty is not None:
            novelty = policy.forced_novelty
        else:
            novelty = novelty_score(candidate_pooled, (e.pooled for e in bank.entries),
                                    bank.lambda_nu, bank.sim_mode)
        score = evidence_score(relevance, novelty)
        candidate = EvidenceEntry(candidate_pooled, relevance, novelty, score,
                                  frame.frame_index)
        new_evidence, outcome = bank.write(
            candidate,
            chronological=policy.chronological,
            forced_novelty=policy.forced_novelty,
            evict_newest_on_tie=evict_newest_on_tie,
        )

    record = StepRecord(
        frame_index=frame.frame_index,
        relevance=relevance,
        novelty=novelty,
        score=score,
        write_outcome=outcome,
        gate_context_mean=float(gate_c.mean()),
        gate_evidence_mean=float(gate_e.mean()),
        fused_checksum=float(fused.sum()),
        context_read_indices=context_indices,
        evidence_read_indices=evidence_indices,
        tensors=StepTensors(frame.feature, r_context, r_evidence, fused, candidate_pooled)
        if collect_tensors
        else None,
    )
    new_state = PipelineState(new_context, new_evidence, state.step + 1,
                              state.question_pooled)
    return new_state, fused, record
