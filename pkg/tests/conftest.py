"""Common fixtures for pytest tests."""

# pylint: disable=protected-access,redefined-outer-name,unused-argument
import logging

import numpy as np
import pytest

from pairplan.geometry import Trajectory
from pairplan.il import ILPolicy
from pairplan.rwm import RwmModel
from pairplan.sampler import SamplerPolicy
from pairplan.settings import (
    ALL_FAMILIES,
    ExperimentConfig,
    GrpoConfig,
    IlConfig,
    NetConfig,
    OptimConfig,
    RwmConfig,
    SuiteConfig,
)
from pairplan.sim import Scenario, build_suite, encode_scene

logger = logging.getLogger(__name__)


@pytest.fixture(scope="module")
def config() -> ExperimentConfig:
    """Define a desk-sized experiment config that trains in seconds.

    Returns:
        An ExperimentConfig with tiny networks and short schedules

    """
    return ExperimentConfig(
        seed=0,
        net=NetConfig(
            token_dim=8,
            feature_dim=96,
            heads=2,
            scene_tokens=2,
            hidden_dim=16,
            feature_pool=4,
        ),
        il=IlConfig(epochs=5, batch_size=4, optim=OptimConfig(lr=1e-2, weight_decay=0.0)),
        grpo=GrpoConfig(updates=2, batch_size=2, inner_epochs=1),
        rwm=RwmConfig(epochs=3, batch_size=32),
        suite=SuiteConfig(per_family=2),
    )


@pytest.fixture(scope="module")
def suite(config: ExperimentConfig) -> list[Scenario]:
    """Build a suite of two scenarios per family with a corrupted share.

    Returns:
        Ten scenarios, three of them with corrupted experts

    """
    return build_suite(
        ALL_FAMILIES,
        config.suite.per_family,
        config.seed,
        config.suite.corrupted_fraction,
        config.simulator,
        config.metrics,
    )


@pytest.fixture(scope="module")
def scenario(suite: list[Scenario]) -> Scenario:
    """Pick the first StraightFollow scenario of the suite.

    Returns:
        A scenario with one lead vehicle

    """
    return next(s for s in suite if s.family == "StraightFollow")


@pytest.fixture(scope="module")
def features(scenario: Scenario, config: ExperimentConfig) -> np.ndarray:
    """Encode the StraightFollow scenario.

    Returns:
        The scene feature vector

    """
    return encode_scene(scenario, config.net)


@pytest.fixture(scope="module")
def reference(scenario: Scenario) -> Trajectory:
    """Return the StraightFollow expert trajectory.

    Returns:
        The expert trajectory used as the tree root

    """
    return scenario.expert_trajectory


def make_sampler(config: ExperimentConfig, seed: int | None, **sampler_updates) -> SamplerPolicy:
    """Create a sampler for the config, optionally with changed sampler settings."""
    return SamplerPolicy.create(
        config.net,
        config.sampler.model_copy(update=sampler_updates),
        config.simulator.horizon,
        config.simulator.dt,
        config.simulator.speed_limit,
        seed,
    )


@pytest.fixture(scope="module")
def zero_sampler(config: ExperimentConfig) -> SamplerPolicy:
    """Create a sampler with all-zero parameters.

    Returns:
        A sampler whose means sit at the box centres

    """
    return make_sampler(config, None)


@pytest.fixture(scope="module")
def sampler(config: ExperimentConfig) -> SamplerPolicy:
    """Create a randomly initialised sampler.

    Returns:
        A seeded sampler

    """
    return make_sampler(config, 0)


@pytest.fixture(scope="module")
def il_policy(config: ExperimentConfig) -> ILPolicy:
    """Create a randomly initialised IL policy.

    Returns:
        A seeded, untrained IL policy

    """
    return ILPolicy.create(config.net, config.simulator.horizon, config.simulator.dt, seed=1)


@pytest.fixture(scope="module")
def rwm_model(config: ExperimentConfig) -> RwmModel:
    """Create a randomly initialised reward world model.

    Returns:
        A seeded, untrained RWM

    """
    return RwmModel.create(config.net, config.simulator.horizon, seed=2)
