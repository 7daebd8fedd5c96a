import itertools
import json

import numpy as np
import pytest

from videomem.evidence_bank import entry_similarity, novelty_score, relevance_score
from videomem.geometry_fusion import fuse_geometry
from videomem.kernels import cosine_similarity
from videomem.params import init_bundle
from videomem.synthetic import (
    FrameSpec,
    decode_camera,
    embed_frame,
    gen_scenario,
    gen_separable_scenario,
    label_mean,
    question_vector,
    scenario_from_json_obj,
    semantic_embedding,
)

from conftest import small_dims


class TestGenScenario:
    def test_no_revisits_all_labels_distinct(self):
        sc = gen_scenario(seed=1, length=8, n_labels=8, relevant_fraction=0.5,
                          revisit_rate=0.0)
        labels = [f.content_label for f in sc.frames]
        assert len(set(labels)) == len(labels)

    def test_zero_relevant_fraction_empty(self):
        sc = gen_scenario(seed=1, length=8, n_labels=8, relevant_fraction=0.0,
                          revisit_rate=0.3)
        assert sc.relevant_indices == frozenset()
        assert all(f.relevance_strength == 0.0 for f in sc.frames)

    def test_deterministic_in_seed(self):
        a = gen_scenario(seed=42, length=20, n_labels=8, relevant_fraction=0.5,
                         revisit_rate=0.4, noise_scale=0.1)
        b = gen_scenario(seed=42, length=20, n_labels=8, relevant_fraction=0.5,
                         revisit_rate=0.4, noise_scale=0.1)
        assert a == b
        assert a.checksum() == b.checksum()
        c = gen_scenario(seed=43, length=20, n_labels=8, relevant_fraction=0.5,
                         revisit_rate=0.4, noise_scale=0.1)
        assert a.checksum() != c.checksum()

    def test_degenerate_parameters_rejected(self):
        with pytest.raises(ValueError):
            gen_scenario(seed=1, length=0, n_labels=4, relevant_fraction=0.5,
                         revisit_rate=0.0)
        with pytest.raises(ValueError):
            gen_scenario(seed=1, length=4, n_labels=4, relevant_fraction=1.5,
                         revisit_rate=0.0)
        with pytest.raises(ValueError):
            gen_scenario(seed=1, length=4, n_labels=4, relevant_fraction=0.5,
                         revisit_rate=0.0, noise_scale=-0.1)

    def test_relevant_indices_match_labels(self):
        sc = gen_scenario(seed=7, length=30, n_labels=6, relevant_fraction=0.5,
                          revisit_rate=0.5)
        labels = sc.frame_labels()
        relevant_labels = {labels[i] for i in sc.relevant_indices}
        for t, f in enumerate(sc.frames, start=1):
            assert (t in sc.relevant_indices) == (f.content_label in relevant_labels)

    def test_json_round_trip(self):
        sc = gen_scenario(seed=3, length=10, n_labels=5, relevant_fraction=0.4,
                          revisit_rate=0.3, noise_scale=0.2)
        again = scenario_from_json_obj(json.loads(json.dumps(sc.to_json_obj())))
        assert again == sc


class TestEmbedFrame:
    def test_exact_revisit_at_zero_noise(self, dims):
        pose = (0.5, -1.0, 0.3)
        a = FrameSpec(content_label=2, relevance_strength=1.0, camera_pose=pose,
                      noise_scale=0.0)
        fa = embed_frame(a, 3, dims, seed=5)
        fb = embed_frame(a, 9, dims, seed=5)
        np.testing.assert_array_equal(fa.visual, fb.visual)
        np.testing.assert_array_equal(fa.geometry, fb.geometry)
        np.testing.assert_array_equal(fa.camera, fb.camera)
        assert fa.frame_index != fb.frame_index

    def test_noise_differs_per_frame(self, dims):
        spec = FrameSpec(content_label=2, relevance_strength=1.0,
                         camera_pose=(0.0, 0.0, 0.0), noise_scale=0.1)
        fa = embed_frame(spec, 3, dims, seed=5)
        fb = embed_frame(spec, 4, dims, seed=5)
        assert np.any(fa.visual != fb.visual)

    def test_distinct_labels_have_orthogonal_token_means(self, dims):
        for a, b in itertools.combinations(range(6), 2):
            ma = label_mean(5, a, dims.feature_dim)
            mb = label_mean(5, b, dims.feature_dim)
            assert abs(cosine_similarity(ma, mb)) < 0.3
        # anchor matrices inherit the means exactly
        fa = embed_frame(FrameSpec(0, 0.0, (0, 0, 0), 0.0), 1, dims, seed=5)
        np.testing.assert_allclose(fa.visual.mean(axis=0),
                                   label_mean(5, 0, dims.feature_dim), atol=1e-12)

    def test_camera_round_trip(self, dims):
        pose = (1.25, -3.5, 0.75)
        spec = FrameSpec(content_label=1, relevance_strength=0.0, camera_pose=pose,
                         noise_scale=0.0)
        frame = embed_frame(spec, 1, dims, seed=5)
        np.testing.assert_allclose(decode_camera(frame.camera), pose, atol=1e-9)

    def test_revisit_novelty_exactly_zero_through_the_pipeline(self, dims):
        # same label, zero noise: the calibrated features match exactly, so the
        # pooled entries are duplicates and novelty collapses to 0
        bundle = init_bundle(11, dims)
        pose = (0.2, 0.4, -0.1)
        spec = FrameSpec(content_label=3, relevance_strength=1.0, camera_pose=pose,
                         noise_scale=0.0)
        f1 = fuse_geometry(embed_frame(spec, 1, dims, seed=5), bundle.geometry)
        f2 = fuse_geometry(embed_frame(spec, 2, dims, seed=5), bundle.geometry)
        from videomem.evidence_bank import pool_entry

        e1 = pool_entry(f1.feature, dims.grid_h, dims.grid_w, bundle.evidence)
        e2 = pool_entry(f2.feature, dims.grid_h, dims.grid_w, bundle.evidence)
        assert novelty_score(e2, [e1], 1.0) == 0.0
        assert entry_similarity(e1, e2) == 1.0


class TestSemanticStub:
    def test_full_strength_is_collinear(self, dims):
        spec = FrameSpec(content_label=0, relevance_strength=1.0,
                         camera_pose=(0, 0, 0), noise_scale=0.0)
        v = semantic_embedding(spec, "q", dims, seed=5)
        q = question_vector(5, "q", dims.feature_dim)
        assert cosine_similarity(v, q) == pytest.approx(1.0)
        assert relevance_score(v, q, 1.0) == pytest.approx(1.0)

    def test_zero_strength_is_antipodal(self, dims):
        spec = FrameSpec(content_label=0, relevance_strength=0.0,
                         camera_pose=(0, 0, 0), noise_scale=0.0)
        v = semantic_embedding(spec, "q", dims, seed=5)
        q = question_vector(5, "q", dims.feature_dim)
        r = relevance_score(v, q, 1.0)
        assert r <= 0.05
        assert r == pytest.approx(0.0, abs=1e-12)

    def test_strength_maps_exactly_to_relevance(self, dims):
        q = question_vector(5, "q", dims.feature_dim)
        for s in (0.0, 0.25, 0.5, 0.75, 1.0):
            spec = FrameSpec(content_label=2, relevance_strength=s,
                             camera_pose=(0, 0, 0), noise_scale=0.0)
            v = semantic_embedding(spec, "q", dims, seed=5)
            assert relevance_score(v, q, 1.0) == pytest.approx(s, abs=1e-9)

    def test_deterministic(self, dims):
        spec = FrameSpec(content_label=1, relevance_strength=0.6,
                         camera_pose=(0, 0, 0), noise_scale=0.0)
        a = semantic_embedding(spec, "q", dims, seed=5)
        b = semantic_embedding(spec, "q", dims, seed=5)
        np.testing.assert_array_equal(a, b)


class TestInitParams:
    def test_same_seed_identical(self, dims):
        a = init_bundle(9, dims)
        b = init_bundle(9, dims)
        np.testing.assert_array_equal(a.geometry.proj_g, b.geometry.proj_g)
        np.testing.assert_array_equal(a.fusion.mlp_gate_context.weights[0],
                                      b.fusion.mlp_gate_context.weights[0])

    def test_different_seed_differs(self, dims):
        a = init_bundle(9, dims)
        b = init_bundle(10, dims)
        assert np.any(a.geometry.proj_g != b.geometry.proj_g)

    def test_fan_in_bound(self, dims):
        bundle = init_bundle(9, dims)
        for proj, fan_in in (
            (bundle.geometry.proj_g, dims.geom_dim),
            (bundle.geometry.proj_q, dims.feature_dim),
            (bundle.context.proj_k, dims.feature_dim),
            (bundle.evidence.proj_v, dims.feature_dim),
        ):
            assert np.all(np.abs(proj) <= 1.0 / np.sqrt(fan_in))
        mlp = bundle.fusion.mlp_gate_context
        assert np.all(np.abs(mlp.weights[0]) <= 1.0 / np.sqrt(mlp.in_dim))


class TestSeparableScenario:
    def test_planted_labels_each_once_and_early(self):
        sc = gen_separable_scenario(seed=1, length=64, n_planted=8)
        planted = [f for f in sc.frames if f.relevance_strength == 1.0]
        assert len(planted) == 8
        assert len({f.content_label for f in planted}) == 8
        assert max(sc.relevant_indices) <= 48  # first three quarters
        assert all(f.noise_scale == 0.0 for f in sc.frames)

    def test_distractors_have_zero_strength(self):
        sc = gen_separable_scenario(seed=1, length=64, n_planted=8)
        for t, f in enumerate(sc.frames, start=1):
            if t not in sc.relevant_indices:
                assert f.relevance_strength == 0.0

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            gen_separable_scenario(seed=1, length=8, n_planted=8)
