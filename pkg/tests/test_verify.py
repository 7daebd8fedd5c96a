import dataclasses

import pytest

from videomem.verify import verify_many, verify_run

from conftest import small_config


def verify_config(**overrides):
    scenario = dict(length=60, n_labels=8, relevant_fraction=0.5, revisit_rate=0.4,
                    noise_scale=0.05)
    scenario.update(overrides.pop("scenario", {}))
    from videomem.config import ScenarioConfig

    return small_config(scenario=ScenarioConfig(**scenario), capacity=4, **overrides)


class TestVerifyRun:
    def test_default_stream_passes(self):
        result = verify_run(verify_config(seed=3))
        assert result.passed
        assert result.steps == 60
        assert result.writes_checked == 60
        assert result.reads_checked > 0

    def test_passes_across_policies(self):
        for policy in ("scored", "relevance_only", "novelty_only", "no_bias"):
            result = verify_run(verify_config(seed=4, policy=policy))
            assert result.passed, (policy, [d.render() for d in result.divergences])

    def test_corrupted_tie_break_fails_at_first_tie(self):
        # heavy revisiting at zero noise plus zero-relevance frames guarantees
        # exact score ties in a full bank
        cfg = verify_config(
            seed=5,
            scenario=dict(length=40, n_labels=4, relevant_fraction=0.25,
                          revisit_rate=0.7, noise_scale=0.0),
        )
        clean = verify_run(cfg)
        assert clean.passed
        corrupted = verify_run(cfg, evict_newest_on_tie=True)
        assert not corrupted.passed
        first = corrupted.divergences[0]
        assert first.check in ("write kind", "eviction target")

    def test_many_seeds(self):
        results = verify_many(verify_config(), range(4))
        assert [r.seed for r in results] == [0, 1, 2, 3]
        assert all(r.passed for r in results)
