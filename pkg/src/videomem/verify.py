"""Replay verification against the brute-force oracle.

Runs a stream and, at every write, recomputes the novelty refresh and the
eviction decision from scratch (O(n^2) pairwise similarities, explicit
argmin). Periodically also checks the two read-modulation equivalences:
camera-delta disabled must equal plain cross-attention over the window,
and an all-ones evidence score must equal an unmodulated evidence read.
Any disagreement is reported with its step index and both decisions.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .config import RunConfig
from .params import init_bundle
from .pipeline import Toggles, resolve_policy, step
from .runner import build_initial_state
from .synthetic import Scenario, embed_frame, gen_scenario, semantic_embedding

SCORE_TOL = 1e-9
READ_TOL = 1e-6


@dataclass(frozen=True)
class Divergence:
    step: int
    check: str
    detail: str

    def render(self) -> str:
        return f"step {self.step}: {self.check}: {self.detail}"


@dataclass
class VerifyResult:
    seed: int
    steps: int = 0
    writes_checked: int = 0
    reads_checked: int = 0
    divergences: list[Divergence] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.divergences


def _scenario_for(config: RunConfig) -> Scenario:
    sc = config.scenario
    return gen_scenario(
        seed=config.seed,
        length=sc.length,
        n_labels=sc.n_labels,
        relevant_fraction=sc.relevant_fraction,
        revisit_rate=sc.revisit_rate,
        noise_scale=sc.noise_scale,
        question_label=sc.question_label,
    )


def verify_run(config: RunConfig, scenario: Scenario | None = None, *,
               equivalence_every: int = 16,
               evict_newest_on_tie: bool = False,
               max_divergences: int = 8) -> VerifyResult:
    """Replay one stream under the oracle's eye.

    ``evict_newest_on_tie`` corrupts the implementation's tie-break and is
    only here so the negative control can prove the oracle catches it.
    """
    config = config.validate()
    if scenario is None:
        scenario = _scenario_for(config)
    bundle = init_bundle(config.seed, config.dims)
    policy = resolve_policy(config.policy, config.lambda_r, config.lambda_nu)
    toggles = Toggles(
        geometry_fusion=config.geometry_fusion,
        context_bank=config.context_bank,
        evidence_bank=config.evidence_bank,
        camera_delta=config.camera_delta,
    )
    state = build_initial_state(config, scenario)
    result = VerifyResult(seed=config.seed)

    for t, spec in enumerate(scenario.frames, start=1):
        prev = state
        inputs = embed_frame(spec, t, config.dims, scenario.seed)
        semantic = semantic_embedding(spec, scenario.question_label, config.dims,
                                      scenario.seed)
        state, _, record = step(prev, inputs, semantic, bundle, policy=policy,
                                toggles=toggles, collect_tensors=True,
                                evict_newest_on_tie=evict_newest_on_tie)
        result.steps += 1

        if toggles.evidence_bank and not policy.chronological:
            _check_write(result, t, prev, record, config, policy)
            result.writes_checked += 1
        if t % equivalence_every == 0:
            _check_reads(result, t, prev, record, inputs, bundle, toggles)
            result.reads_checked += 1
        if len(result.divergences) >= max_divergences:
            break
    return result


def _check_write(result, t, prev, record, config, policy):
    stored = [(e.frame_index, e.pooled, e.relevance) for e in prev.evidence_bank.entries]
    candidate = (t, record.tensors.candidate_pooled, record.relevance)
    outcome = record.write_outcome
    if len(stored) < config.capacity:
        expected_kind = "inserted_below_capacity"
        expected_table = oracle.below_capacity_refresh(
            stored, candidate, config.lambda_nu, config.sim_mode, policy.forced_novelty
        )
        expected_evicted = None
    else:
        evicted, expected_table = oracle.eviction_decision(
            stored, candidate, config.lambda_nu, config.sim_mode, policy.forced_novelty
        )
        if evicted == t:
            expected_kind, expected_evicted = "candidate_rejected", None
        else:
            expected_kind, expected_evicted = "inserted_with_eviction", evicted

    if outcome.kind != expected_kind:
        result.divergences.append(Divergence(
            t, "write kind", f"oracle says {expected_kind}, got {outcome.kind}"
        ))
        return
    if outcome.evicted_frame_index != expected_evicted:
        result.divergences.append(Divergence(
            t, "eviction target",
            f"oracle evicts {expected_evicted}, implementation evicted "
            f"{outcome.evicted_frame_index}",
        ))
        return
    got_table = {frame: (nu, score) for frame, nu, score in outcome.refreshed}
    if set(got_table) != set(expected_table):
        result.divergences.append(Divergence(
            t, "retained set",
            f"oracle retains {sorted(expected_table)}, got {sorted(got_table)}",
        ))
        return
    for frame, (nu, score) in expected_table.items():
        got_nu, got_score = got_table[frame]
        if abs(got_nu - nu) > SCORE_TOL or abs(got_score - score) > SCORE_TOL:
            result.divergences.append(Divergence(
                t, "refreshed scores",
                f"frame {frame}: oracle (nu={nu!r}, w={score!r}), "
                f"got (nu={got_nu!r}, w={got_score!r})",
            ))
            return


def _check_reads(result, t, prev, record, inputs, bundle, toggles):
    feature = record.tensors.calibrated
    if toggles.context_bank and prev.context_bank.entries:
        plain = prev.context_bank.read(feature, inputs.camera, bundle.context,
                                       modulated=False)
        expected = oracle.unmodulated_read(
            feature,
            [e.feature for e in prev.context_bank.entries],
            bundle.context.proj_q, bundle.context.proj_k, bundle.context.proj_v,
        )
        err = float(np.max(np.abs(plain - expected)))
        if err > READ_TOL:
            result.divergences.append(Divergence(
                t, "camera-delta-off read", f"max deviation {err:g} from plain attention"
            ))
    if toggles.evidence_bank and prev.evidence_bank.entries:
        neutral_entries = tuple(
            dataclasses.replace(e, relevance=1.0, novelty=1.0, score=1.0)
            for e in prev.evidence_bank.entries
        )
        neutral = dataclasses.replace(prev.evidence_bank, entries=neutral_entries)
        got = neutral.read(feature, bundle.evidence)
        expected = oracle.unmodulated_read(
            feature,
            [e.pooled for e in prev.evidence_bank.entries],
            bundle.evidence.proj_q, bundle.evidence.proj_k, bundle.evidence.proj_v,
        )
        err = float(np.max(np.abs(got - expected)))
        if err > READ_TOL:
            result.divergences.append(Divergence(
                t, "neutral-score read", f"max deviation {err:g} from plain attention"
            ))


def verify_many(config: RunConfig, seeds, **kwargs) -> list[VerifyResult]:
    results = []
    for seed in seeds:
        cfg = dataclasses.replace(config, seed=int(seed))
        results.append(verify_run(cfg, **kwargs))
    return results
