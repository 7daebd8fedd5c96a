import numpy as np
import pytest

from videomem import Dims, FrameInputs, RunConfig, ScenarioConfig, init_bundle


def small_dims(**overrides) -> Dims:
    base = dict(feature_dim=16, geom_dim=6, geom_tokens=5,
                grid_h=4, grid_w=4, pool_h=2, pool_w=2)
    base.update(overrides)
    return Dims(**base)


def small_config(**overrides) -> RunConfig:
    scenario = overrides.pop("scenario", ScenarioConfig(
        length=24, n_labels=8, relevant_fraction=0.5, revisit_rate=0.3,
        noise_scale=0.05,
    ))
    base = dict(dims=small_dims(), scenario=scenario, tau=3, capacity=5, seed=0)
    base.update(overrides)
    return RunConfig(**base).validate()


def random_frame(rng: np.random.Generator, dims: Dims, frame_index: int = 1) -> FrameInputs:
    return FrameInputs(
        visual=rng.normal(size=(dims.visual_tokens, dims.feature_dim)),
        geometry=rng.normal(size=(dims.geom_tokens, dims.geom_dim)),
        camera=rng.normal(size=(1, dims.geom_dim)),
        frame_index=frame_index,
        grid_h=dims.grid_h,
        grid_w=dims.grid_w,
    )


@pytest.fixture
def dims():
    return small_dims()


@pytest.fixture
def bundle(dims):
    return init_bundle(11, dims)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
