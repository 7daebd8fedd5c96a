"""Multi-policy comparison over seeds and stream-length buckets.

Within each (seed, length) cell every policy consumes the identical
scenario; the cell's scenario checksum is recorded and each run's report
is asserted against it.
"""

from __future__ import annotations

import dataclasses
import math

from .config import ConfigError, RunConfig
from .pipeline import POLICY_NAMES
from .runner import run_stream
from .synthetic import gen_scenario

COMPARE_FORMAT_VERSION = 1


def compare_policies(config: RunConfig, seeds, lengths, policies) -> dict:
    """Mean and standard deviation of recall per (policy, length) cell."""
    seeds = [int(s) for s in seeds]
    lengths = [int(b) for b in lengths]
    policies = list(policies)
    if not seeds:
        raise ConfigError("need at least one seed")
    if not lengths:
        raise ConfigError("need at least one length bucket")
    if len(policies) < 2:
        raise ConfigError("need >=2 policies to compare")
    for p in policies:
        if p not in POLICY_NAMES:
            raise ConfigError(f"unknown policy {p!r}; expected one of {POLICY_NAMES}")

    recalls = {p: {length: [] for length in lengths} for p in policies}
    checksums: dict[str, dict[str, str]] = {}
    for length in lengths:
        checksums[str(length)] = {}
        for seed in seeds:
            cfg = dataclasses.replace(
                config,
                seed=seed,
                scenario=dataclasses.replace(config.scenario, length=length),
            ).validate()
            sc = cfg.scenario
            scenario = gen_scenario(
                seed=seed,
                length=sc.length,
                n_labels=sc.n_labels,
                relevant_fraction=sc.relevant_fraction,
                revisit_rate=sc.revisit_rate,
                noise_scale=sc.noise_scale,
                question_label=sc.question_label,
            )
            cell_checksum = scenario.checksum()
            checksums[str(length)][str(seed)] = cell_checksum
            for policy in policies:
                report = run_stream(cfg, scenario, policy=policy)
                if report.scenario_checksum != cell_checksum:
                    raise AssertionError(
                        f"policy {policy} saw a different scenario in cell "
                        f"(seed={seed}, length={length})"
                    )
                recalls[policy][length].append(report.recall)

    cells: dict[str, dict[str, dict]] = {}
    for policy in policies:
        cells[policy] = {}
        for length in lengths:
            values = recalls[policy][length]
            mean = sum(values) / len(values)
            sd = (
                math.sqrt(sum((v - mean) ** 2 for v in values) / (len(values) - 1))
                if len(values) > 1
                else 0.0
            )
            cells[policy][str(length)] = {
                "mean_recall": mean,
                "sd_recall": sd,
                "recalls": values,
            }
    return {
        "format_version": COMPARE_FORMAT_VERSION,
        "seeds": seeds,
        "lengths": lengths,
        "policies": policies,
        "config": config.echo(),
        "scenario_checksums": checksums,
        "cells": cells,
    }


def comparison_table(result: dict) -> str:
    """Aligned text rendering of a comparison result."""
    lengths = result["lengths"]
    headers = ["policy"] + [f"len {b}" for b in lengths]
    rows = []
    for policy in result["policies"]:
        row = [policy]
        for b in lengths:
            cell = result["cells"][policy][str(b)]
            row.append(f"{cell['mean_recall']:.4f} +/- {cell['sd_recall']:.4f}")
        rows.append(row)
    widths = [max(len(r[i]) for r in [headers] + rows) for i in range(len(headers))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)
