import json

import numpy as np
import pytest

from videomem.compare import compare_policies, comparison_table
from videomem.config import ConfigError, RunConfig, config_from_dict
from videomem.jsonio import canonical_bytes, canonical_dumps, matrix_from_json, matrix_to_json
from videomem.metrics import recall_at_capacity, redundancy
from videomem.runner import run_stream
from videomem.synthetic import gen_scenario

from conftest import small_config


class TestCanonicalJson:
    def test_sorted_keys_no_whitespace(self):
        s = canonical_dumps({"b": 1, "a": [1.5, None, True]})
        assert s == '{"a":[1.5,null,true],"b":1}'

    def test_nine_significant_digits(self):
        assert canonical_dumps(1.0 / 3.0) == "0.333333333"

    def test_repr_floats_round_trip(self):
        x = 0.1 + 0.2
        s = canonical_dumps({"x": x}, float_repr=True)
        assert json.loads(s)["x"] == x

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            canonical_dumps(float("nan"))

    def test_matrix_round_trip(self):
        m = np.arange(6, dtype=float).reshape(2, 3) / 7.0
        again = matrix_from_json(matrix_to_json(m))
        np.testing.assert_array_equal(m, again)

    def test_matrix_missing_field(self):
        with pytest.raises(ValueError, match="missing field 'data'"):
            matrix_from_json({"rows": 1, "cols": 1})


class TestMetrics:
    def test_recall_full_coverage(self):
        labels = {1: 10, 2: 11, 3: 10, 4: 12}
        assert recall_at_capacity({1, 2, 4}, {1, 2, 3, 4}, labels) == 1.0

    def test_recall_disjoint(self):
        assert recall_at_capacity({5, 6}, {1, 2}) == 0.0

    def test_recall_half_of_labels(self):
        labels = {i: i for i in range(1, 9)}
        assert recall_at_capacity({1, 2}, {1, 2, 3, 4}, labels) == 0.5

    def test_recall_vacuous(self):
        assert recall_at_capacity({1, 2}, set()) == 1.0

    def test_redundancy_identical_entries(self):
        e = np.array([[1.0, 2.0]])
        assert redundancy([e, e.copy(), e.copy()]) == pytest.approx(1.0)

    def test_redundancy_orthogonal_means(self):
        a = np.array([[1.0, 0.0]])
        b = np.array([[0.0, 1.0]])
        assert redundancy([a, b]) == pytest.approx(0.5)

    def test_redundancy_single_entry(self):
        assert redundancy([np.array([[1.0, 0.0]])]) == 0.0


class TestRunReport:
    def test_byte_determinism(self):
        config = small_config()
        scenario = gen_scenario(seed=8, length=12, n_labels=8, relevant_fraction=0.5,
                                revisit_rate=0.3, noise_scale=0.05)
        a = run_stream(config, scenario).to_canonical_bytes()
        b = run_stream(config, scenario).to_canonical_bytes()
        assert a == b

    def test_wall_time_serialized_null(self):
        config = small_config()
        scenario = gen_scenario(seed=8, length=4, n_labels=4, relevant_fraction=0.5,
                                revisit_rate=0.0, noise_scale=0.0)
        report = run_stream(config, scenario)
        assert report.wall_time > 0
        payload = json.loads(report.to_canonical_bytes())
        assert payload["wall_time"] is None

    def test_report_includes_config_echo_and_checksum(self):
        config = small_config()
        scenario = gen_scenario(seed=8, length=4, n_labels=4, relevant_fraction=0.5,
                                revisit_rate=0.0, noise_scale=0.0)
        report = run_stream(config, scenario, policy="fifo")
        payload = json.loads(report.to_canonical_bytes())
        assert payload["config"]["policy"] == "fifo"
        assert payload["config"]["tau"] == config.tau
        assert payload["scenario_checksum"] == scenario.checksum()
        assert payload["format_version"] == 1

    def test_verbose_records_carry_tensors(self):
        config = small_config()
        scenario = gen_scenario(seed=8, length=3, n_labels=3, relevant_fraction=0.5,
                                revisit_rate=0.0, noise_scale=0.0)
        report = run_stream(config, scenario, collect_tensors=True)
        payload = json.loads(report.to_canonical_bytes(verbose=True))
        step0 = payload["steps"][0]
        assert "tensors" in step0
        assert step0["tensors"]["fused"]["rows"] == config.dims.visual_tokens
        lean = json.loads(run_stream(config, scenario).to_canonical_bytes())
        assert "tensors" not in lean["steps"][0]


class TestConfig:
    def test_round_trip_through_dict(self):
        config = small_config()
        again = config_from_dict(config.echo())
        assert again.echo() == config.echo()

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            config_from_dict({"no_such_option": 1})

    def test_bad_policy_rejected(self):
        with pytest.raises(ConfigError, match="unknown policy"):
            config_from_dict({"policy": "nonsense"})

    def test_labels_capped_by_feature_dim(self):
        with pytest.raises(ConfigError, match="n_labels"):
            small_config().validate() and config_from_dict(
                {"dims": {"feature_dim": 4}, "scenario": {"n_labels": 5}}
            )


class TestCompare:
    def base(self):
        return small_config(scenario=small_config().scenario)

    def test_requires_two_policies(self):
        with pytest.raises(ConfigError, match="need >=2 policies"):
            compare_policies(self.base(), [1], [8], ["scored"])

    def test_requires_seeds(self):
        with pytest.raises(ConfigError, match="at least one seed"):
            compare_policies(self.base(), [], [8], ["scored", "fifo"])

    def test_shared_scenario_and_cells(self):
        result = compare_policies(self.base(), [1, 2], [8, 12], ["scored", "fifo"])
        assert set(result["cells"]) == {"scored", "fifo"}
        for policy in ("scored", "fifo"):
            for bucket in ("8", "12"):
                cell = result["cells"][policy][bucket]
                assert len(cell["recalls"]) == 2
                assert 0.0 <= cell["mean_recall"] <= 1.0
        assert set(result["scenario_checksums"]["8"]) == {"1", "2"}
        table = comparison_table(result)
        assert "scored" in table and "len 12" in table
        canonical_bytes(result)  # must serialize cleanly
