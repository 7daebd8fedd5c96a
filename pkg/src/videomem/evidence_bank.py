"""Fixed-capacity bank of pooled frame entries scored by relevance x novelty.

Each entry keeps a spatially pooled token matrix, a question-relevance
score fixed at write time, a novelty score that is refreshed whenever the
bank changes, and their product. The product drives two things: read-time
modulation (it biases keys and scales values in the attention readout) and
capacity eviction (the member of bank-plus-candidate with the smallest
product is dropped, ties going to the oldest frame).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .kernels import (
    Matrix,
    as_matrix,
    attention,
    cosine_similarity,
    grid_pool,
    mean_pool_tokens,
)

SIM_MODES = ("pooled_mean", "per_token")

INSERTED_BELOW_CAPACITY = "inserted_below_capacity"
INSERTED_WITH_EVICTION = "inserted_with_eviction"
CANDIDATE_REJECTED = "candidate_rejected"


@dataclass(frozen=True)
class EvidenceEntry:
    """One stored observation: pooled tokens plus its scores."""

    pooled: Matrix
    relevance: float
    novelty: float
    score: float
    frame_index: int

    def __post_init__(self):
        m = as_matrix(self.pooled, "pooled entry")
        m.setflags(write=False)
        object.__setattr__(self, "pooled", m)
        if self.relevance < 0 or self.novelty < 0:
            raise ValueError("relevance and novelty must be nonnegative")
        if self.score != self.relevance * self.novelty:
            raise ValueError("score must equal relevance * novelty exactly")


@dataclass(frozen=True)
class WriteOutcome:
    """What a write did: insertion kind, any evicted frame, refreshed scores."""

    kind: str
    evicted_frame_index: int | None
    refreshed: tuple[tuple[int, float, float], ...]


@dataclass(frozen=True)
class EvidenceBankParams:
    """d->d attention projections plus the pooling grid for new entries."""

    proj_q: Matrix
    proj_k: Matrix
    proj_v: Matrix
    pool_h: int
    pool_w: int
    head_count: int = 1

    def __post_init__(self):
        for name in ("proj_q", "proj_k", "proj_v"):
            m = as_matrix(getattr(self, name), name)
            m.setflags(write=False)
            object.__setattr__(self, name, m)
        d = self.proj_q.shape[0]
        for name in ("proj_q", "proj_k", "proj_v"):
            if getattr(self, name).shape != (d, d):
                raise ValueError(f"{name} must be {d}x{d}")
        if self.pool_h < 1 or self.pool_w < 1:
            raise ValueError("pool dims must be >= 1")


def pool_entry(feature: Matrix, grid_h: int, grid_w: int,
               p: EvidenceBankParams) -> Matrix:
    """Compact (pool_h*pool_w, d) entry from a calibrated frame feature."""
    return grid_pool(feature, grid_h, grid_w, p.pool_h, p.pool_w)


def relevance_score(frame_semantic, question_pooled, lambda_r: float) -> float:
    """Question relevance in [0, lambda_r].

    Cosine between the frame's semantic vector and the pooled question
    vector, mapped affinely to [0, 1] and scaled. A zero vector on either
    side carries no evidence and scores 0.
    """
    a = np.asarray(frame_semantic, dtype=np.float64).reshape(-1)
    b = np.asarray(question_pooled, dtype=np.float64).reshape(-1)
    if float(np.linalg.norm(a)) < 1e-12 or float(np.linalg.norm(b)) < 1e-12:
        return 0.0
    return lambda_r * (cosine_similarity(a, b) + 1.0) / 2.0


def entry_similarity(a: Matrix, b: Matrix, sim_mode: str = "pooled_mean") -> float:
    """Normalized similarity in [0, 1] between two pooled entries.

    "pooled_mean" compares token-mean vectors; "per_token" averages the
    per-token cosines. Both map cosine through (cos + 1) / 2.
    """
    if sim_mode == "pooled_mean":
        cos = cosine_similarity(mean_pool_tokens(a), mean_pool_tokens(b))
    elif sim_mode == "per_token":
        a = as_matrix(a, "entry a")
        b = as_matrix(b, "entry b")
        if a.shape != b.shape:
            raise ValueError("per-token similarity needs equal entry shapes")
        cos = float(np.mean([cosine_similarity(a[i], b[i]) for i in range(a.shape[0])]))
    else:
        raise ValueError(f"unknown sim_mode {sim_mode!r}")
    return (cos + 1.0) / 2.0


def novelty_score(candidate: Matrix, others, lambda_nu: float,
                  sim_mode: str = "pooled_mean") -> float:
    """lambda_nu * (1 - max similarity to the stored entries).

    An empty comparison set means the candidate is maximally novel and
    scores the full lambda_nu.
    """
    others = list(others)
    if not others:
        return lambda_nu
    best = max(entry_similarity(candidate, o, sim_mode) for o in others)
    return lambda_nu * (1.0 - best)


def evidence_score(relevance: float, novelty: float) -> float:
    if relevance < 0 or novelty < 0:
        raise ValueError("scores must be nonnegative")
    return relevance * novelty


def refresh_novelty(entries, lambda_nu: float, sim_mode: str = "pooled_mean",
                    forced_novelty: float | None = None):
    """Recompute every entry's novelty leave-one-out within ``entries``.

    Relevance is never touched; scores are recomputed as relevance times
    the new novelty. A single entry compares against nothing and gets the
    full lambda_nu. ``forced_novelty`` pins all novelties (policy ablations).
    """
    entries = tuple(entries)
    if not entries:
        return ()
    if forced_novelty is not None:
        return tuple(
            replace(e, novelty=forced_novelty, score=e.relevance * forced_novelty)
            for e in entries
        )
    out = []
    for i, e in enumerate(entries):
        others = [o.pooled for j, o in enumerate(entries) if j != i]
        nu = novelty_score(e.pooled, others, lambda_nu, sim_mode)
        out.append(replace(e, novelty=nu, score=e.relevance * nu))
    return tuple(out)


@dataclass(frozen=True)
class EvidenceBank:
    """Bounded bank of scored entries with score-based replacement."""

    entries: tuple[EvidenceEntry, ...]
    capacity: int
    lambda_r: float = 1.0
    lambda_nu: float = 1.0
    sim_mode: str = "pooled_mean"

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if self.lambda_r <= 0 or self.lambda_nu <= 0:
            raise ValueError("lambda_r and lambda_nu must be positive")
        if self.sim_mode not in SIM_MODES:
            raise ValueError(f"unknown sim_mode {self.sim_mode!r}")
        if len(self.entries) > self.capacity:
            raise ValueError("bank holds more entries than its capacity")
        indices = [e.frame_index for e in self.entries]
        if len(set(indices)) != len(indices):
            raise ValueError("duplicate frame indices in bank")

    @classmethod
    def empty(cls, capacity: int, lambda_r: float = 1.0, lambda_nu: float = 1.0,
              sim_mode: str = "pooled_mean") -> "EvidenceBank":
        return cls((), capacity, lambda_r, lambda_nu, sim_mode)

    def frame_indices(self) -> tuple[int, ...]:
        return tuple(e.frame_index for e in self.entries)

    def read(self, feature: Matrix, p: EvidenceBankParams) -> Matrix:
        """Score-modulated attention over the concatenated pooled tokens.

        Each entry's evidence score is added to every channel of its
        projected key tokens and multiplied into its value tokens, so
        low-scoring evidence contributes less. An empty bank reads as a
        zero matrix. Callers must read before writing the current frame.
        """
        feature = as_matrix(feature, "query feature")
        if not self.entries:
            return np.zeros((feature.shape[0], p.proj_q.shape[1]))
        q = feature @ p.proj_q
        keys = [e.pooled @ p.proj_k + e.score for e in self.entries]
        values = [(e.pooled @ p.proj_v) * e.score for e in self.entries]
        return attention(q, np.vstack(keys), np.vstack(values), p.head_count)

    def write(self, candidate: EvidenceEntry, *, chronological: bool = False,
              forced_novelty: float | None = None,
              evict_newest_on_tie: bool = False) -> tuple["EvidenceBank", WriteOutcome]:
        """Admit a candidate, evicting by score once the bank is full.

        Below capacity the candidate is appended and all novelties are
        refreshed. At capacity, bank-plus-candidate is refreshed jointly,
        the member with the minimum score is dropped (oldest frame on
        ties), and the survivors are refreshed again; dropping the
        candidate itself reports a rejection. ``chronological=True``
        replaces the refresh-and-score machinery with oldest-out FIFO.
        ``evict_newest_on_tie`` is a verification hook that deliberately
        corrupts the tie-break; production callers leave it False.
        """
        if self.entries and candidate.frame_index <= self.entries[-1].frame_index:
            raise ValueError(
                f"candidate frame {candidate.frame_index} is not past the newest "
                f"stored index {self.entries[-1].frame_index}"
            )
        if chronological:
            entries = self.entries + (candidate,)
            evicted = None
            kind = INSERTED_BELOW_CAPACITY
            if len(entries) > self.capacity:
                evicted = entries[0].frame_index
                entries = entries[1:]
                kind = INSERTED_WITH_EVICTION
            bank = replace(self, entries=entries)
            return bank, WriteOutcome(kind, evicted, _score_table(entries))

        if len(self.entries) < self.capacity:
            entries = refresh_novelty(
                self.entries + (candidate,), self.lambda_nu, self.sim_mode, forced_novelty
            )
            bank = replace(self, entries=entries)
            return bank, WriteOutcome(INSERTED_BELOW_CAPACITY, None, _score_table(entries))

        pool = refresh_novelty(
            self.entries + (candidate,), self.lambda_nu, self.sim_mode, forced_novelty
        )
        if evict_newest_on_tie:
            loser = min(pool, key=lambda e: (e.score, -e.frame_index))
        else:
            loser = min(pool, key=lambda e: (e.score, e.frame_index))
        survivors = tuple(e for e in pool if e.frame_index != loser.frame_index)
        survivors = refresh_novelty(survivors, self.lambda_nu, self.sim_mode, forced_novelty)
        bank = replace(self, entries=survivors)
        if loser.frame_index == candidate.frame_index:
            outcome = WriteOutcome(CANDIDATE_REJECTED, None, _score_table(survivors))
        else:
            outcome = WriteOutcome(
                INSERTED_WITH_EVICTION, loser.frame_index, _score_table(survivors)
            )
        return bank, outcome


def _score_table(entries) -> tuple[tuple[int, float, float], ...]:
    return tuple((e.frame_index, e.novelty, e.score) for e in entries)
