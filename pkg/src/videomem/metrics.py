"""Stream-level metrics over the final retained evidence."""

from __future__ import annotations

from itertools import combinations
from typing import Mapping

from .evidence_bank import entry_similarity


def recall_at_capacity(retained, relevant, frame_labels: Mapping[int, int] | None = None) -> float:
    """Fraction of relevant content labels represented among retained frames.

    With no label map every frame is its own label. An empty relevant set
    is vacuously recalled in full.
    """
    retained = set(retained)
    relevant = set(relevant)
    if not relevant:
        return 1.0
    if frame_labels is None:
        frame_labels = {i: i for i in retained | relevant}
    relevant_labels = {frame_labels[i] for i in relevant}
    covered = {frame_labels[i] for i in retained if i in frame_labels} & relevant_labels
    return len(covered) / len(relevant_labels)


def redundancy(pooled_entries) -> float:
    """Mean pairwise normalized similarity of retained entries; 0 below 2."""
    mats = list(pooled_entries)
    if len(mats) < 2:
        return 0.0
    sims = [entry_similarity(a, b, "pooled_mean") for a, b in combinations(mats, 2)]
    return float(sum(sims) / len(sims))
