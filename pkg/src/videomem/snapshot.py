"""Mid-stream state persistence with bit-exact round trips.

A snapshot carries both bank states, the step counter, the question
vector, and the effective config echo (so resuming needs nothing else).
Floats are written with shortest round-trip formatting: save -> load ->
save reproduces the file byte for byte, and a resumed run continues
bit-identically to an uninterrupted one.
"""

from __future__ import annotations

import json

from .config import RunConfig, config_from_dict
from .context_bank import ContextBank, ContextEntry
from .evidence_bank import EvidenceBank, EvidenceEntry
from .jsonio import canonical_bytes, matrix_from_json, matrix_to_json
from .pipeline import PipelineState

SNAPSHOT_FORMAT_VERSION = 1


class SnapshotError(ValueError):
    """Malformed or incompatible snapshot content."""


def state_to_json_obj(state: PipelineState, config: RunConfig) -> dict:
    return {
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "config": config.echo(),
        "step": state.step,
        "question_pooled": state.question_pooled.tolist(),
        "context_bank": {
            "capacity": state.context_bank.capacity,
            "entries": [
                {
                    "frame_index": e.frame_index,
                    "feature": matrix_to_json(e.feature),
                    "camera": matrix_to_json(e.camera),
                }
                for e in state.context_bank.entries
            ],
        },
        "evidence_bank": {
            "capacity": state.evidence_bank.capacity,
            "lambda_r": state.evidence_bank.lambda_r,
            "lambda_nu": state.evidence_bank.lambda_nu,
            "sim_mode": state.evidence_bank.sim_mode,
            "entries": [
                {
                    "frame_index": e.frame_index,
                    "relevance": e.relevance,
                    "novelty": e.novelty,
                    "score": e.score,
                    "pooled": matrix_to_json(e.pooled),
                }
                for e in state.evidence_bank.entries
            ],
        },
    }


def snapshot_bytes(state: PipelineState, config: RunConfig) -> bytes:
    return canonical_bytes(state_to_json_obj(state, config), float_repr=True)


def snapshot_save(state: PipelineState, config: RunConfig, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(snapshot_bytes(state, config))


def _require(obj: dict, field: str, context: str):
    if field not in obj:
        raise SnapshotError(f"{context}: missing field {field!r}")
    return obj[field]


def state_from_json_obj(data: dict) -> tuple[PipelineState, RunConfig]:
    version = _require(data, "format_version", "snapshot")
    if version != SNAPSHOT_FORMAT_VERSION:
        raise SnapshotError(
            f"snapshot: format_version {version!r} unsupported "
            f"(expected {SNAPSHOT_FORMAT_VERSION})"
        )
    config = config_from_dict(_require(data, "config", "snapshot"))

    cb = _require(data, "context_bank", "snapshot")
    context_entries = tuple(
        ContextEntry(
            feature=matrix_from_json(_require(e, "feature", "context entry"), "feature"),
            camera=matrix_from_json(_require(e, "camera", "context entry"), "camera"),
            frame_index=_require(e, "frame_index", "context entry"),
        )
        for e in _require(cb, "entries", "context_bank")
    )
    context = ContextBank(entries=context_entries,
                          capacity=_require(cb, "capacity", "context_bank"))

    eb = _require(data, "evidence_bank", "snapshot")
    evidence_entries = tuple(
        EvidenceEntry(
            pooled=matrix_from_json(_require(e, "pooled", "evidence entry"), "pooled"),
            relevance=_require(e, "relevance", "evidence entry"),
            novelty=_require(e, "novelty", "evidence entry"),
            score=_require(e, "score", "evidence entry"),
            frame_index=_require(e, "frame_index", "evidence entry"),
        )
        for e in _require(eb, "entries", "evidence_bank")
    )
    evidence = EvidenceBank(
        entries=evidence_entries,
        capacity=_require(eb, "capacity", "evidence_bank"),
        lambda_r=_require(eb, "lambda_r", "evidence_bank"),
        lambda_nu=_require(eb, "lambda_nu", "evidence_bank"),
        sim_mode=_require(eb, "sim_mode", "evidence_bank"),
    )
    state = PipelineState(
        context_bank=context,
        evidence_bank=evidence,
        step=_require(data, "step", "snapshot"),
        question_pooled=_require(data, "question_pooled", "snapshot"),
    )
    return state, config


def snapshot_load(path: str) -> tuple[PipelineState, RunConfig]:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"snapshot {path}: parse error at position {exc.pos}: {exc.msg}")
    if not isinstance(data, dict):
        raise SnapshotError(f"snapshot {path}: top level must be an object")
    return state_from_json_obj(data)
