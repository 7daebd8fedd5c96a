"""Stream execution: scenario in, deterministic report out."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .config import RunConfig
from .jsonio import canonical_bytes, matrix_to_json
from .metrics import recall_at_capacity, redundancy
from .params import init_bundle
from .pipeline import (
    ParamsBundle,
    PipelineState,
    StepRecord,
    Toggles,
    WritePolicy,
    resolve_policy,
    step,
)
from .synthetic import Scenario, embed_frame, question_vector, semantic_embedding

REPORT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class RunReport:
    """Everything one stream produced, ready for canonical serialization.

    ``wall_time`` is measured but serialized as null: reports must be
    byte-identical across reruns of the same (config, seed).
    """

    config: dict
    scenario_checksum: str
    steps: tuple[StepRecord, ...]
    retained_frames: tuple[int, ...]
    recall: float
    redundancy: float
    wall_time: float
    format_version: int = REPORT_FORMAT_VERSION

    def to_json_obj(self, verbose: bool = False) -> dict:
        return {
            "format_version": self.format_version,
            "config": self.config,
            "scenario_checksum": self.scenario_checksum,
            "steps": [_record_to_json(r, verbose) for r in self.steps],
            "retained_frames": list(self.retained_frames),
            "recall": self.recall,
            "redundancy": self.redundancy,
            "wall_time": None,
        }

    def to_canonical_bytes(self, verbose: bool = False) -> bytes:
        return canonical_bytes(self.to_json_obj(verbose))


def _record_to_json(r: StepRecord, verbose: bool) -> dict:
    outcome = None
    if r.write_outcome is not None:
        outcome = {
            "kind": r.write_outcome.kind,
            "evicted_frame_index": r.write_outcome.evicted_frame_index,
            "refreshed": [list(row) for row in r.write_outcome.refreshed],
        }
    obj = {
        "frame_index": r.frame_index,
        "relevance": r.relevance,
        "novelty": r.novelty,
        "score": r.score,
        "write_outcome": outcome,
        "gate_context_mean": r.gate_context_mean,
        "gate_evidence_mean": r.gate_evidence_mean,
        "fused_checksum": r.fused_checksum,
        "context_read_indices": list(r.context_read_indices),
        "evidence_read_indices": list(r.evidence_read_indices),
    }
    if verbose and r.tensors is not None:
        obj["tensors"] = {
            "calibrated": matrix_to_json(r.tensors.calibrated),
            "context_readout": matrix_to_json(r.tensors.context_readout),
            "evidence_readout": matrix_to_json(r.tensors.evidence_readout),
            "fused": matrix_to_json(r.tensors.fused),
            "candidate_pooled": None
            if r.tensors.candidate_pooled is None
            else matrix_to_json(r.tensors.candidate_pooled),
        }
    return obj


def build_initial_state(config: RunConfig, scenario: Scenario) -> PipelineState:
    q = question_vector(scenario.seed, scenario.question_label, config.dims.feature_dim)
    return PipelineState.initial(
        tau=config.tau,
        capacity=config.capacity,
        question_pooled=q,
        lambda_r=config.lambda_r,
        lambda_nu=config.lambda_nu,
        sim_mode=config.sim_mode,
    )


def run_stream(config: RunConfig, scenario: Scenario, policy: str | None = None,
               collect_tensors: bool = False) -> RunReport:
    """Run the whole scenario under one write/read policy."""
    config = config.validate()
    policy_name = policy if policy is not None else config.policy
    write_policy = resolve_policy(policy_name, config.lambda_r, config.lambda_nu)
    bundle = init_bundle(config.seed, config.dims)
    state = build_initial_state(config, scenario)
    toggles = Toggles(
        geometry_fusion=config.geometry_fusion,
        context_bank=config.context_bank,
        evidence_bank=config.evidence_bank,
        camera_delta=config.camera_delta,
    )
    started = time.perf_counter()
    records = []
    for t, spec in enumerate(scenario.frames, start=1):
        inputs = embed_frame(spec, t, config.dims, scenario.seed)
        semantic = semantic_embedding(spec, scenario.question_label, config.dims,
                                      scenario.seed)
        state, _, record = step(state, inputs, semantic, bundle, policy=write_policy,
                                toggles=toggles, collect_tensors=collect_tensors)
        records.append(record)
    elapsed = time.perf_counter() - started

    retained = state.evidence_bank.frame_indices()
    config_echo = dict(config.echo())
    config_echo["policy"] = policy_name
    return RunReport(
        config=config_echo,
        scenario_checksum=scenario.checksum(),
        steps=tuple(records),
        retained_frames=retained,
        recall=recall_at_capacity(retained, scenario.relevant_indices,
                                  scenario.frame_labels()),
        redundancy=redundancy([e.pooled for e in state.evidence_bank.entries]),
        wall_time=elapsed,
    )


def run_steps(state: PipelineState, config: RunConfig, scenario: Scenario,
              first: int, count: int,
              bundle: ParamsBundle | None = None,
              policy: WritePolicy | None = None,
              collect_tensors: bool = False) -> tuple[PipelineState, list[StepRecord]]:
    """Advance an existing state through frames [first, first + count)."""
    if bundle is None:
        bundle = init_bundle(config.seed, config.dims)
    if policy is None:
        policy = resolve_policy(config.policy, config.lambda_r, config.lambda_nu)
    toggles = Toggles(
        geometry_fusion=config.geometry_fusion,
        context_bank=config.context_bank,
        evidence_bank=config.evidence_bank,
        camera_delta=config.camera_delta,
    )
    records = []
    for t in range(first, first + count):
        spec = scenario.frames[t - 1]
        inputs = embed_frame(spec, t, config.dims, scenario.seed)
        semantic = semantic_embedding(spec, scenario.question_label, config.dims,
                                      scenario.seed)
        state, _, record = step(state, inputs, semantic, bundle, policy=policy,
                                toggles=toggles, collect_tensors=collect_tensors)
        records.append(record)
    return state, records
