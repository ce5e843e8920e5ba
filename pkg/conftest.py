"""Shared fixtures: seeded generators and configs small enough for unit tests."""

import pytest

from rbm_circuits.learner import LearnerConfig
from rbm_circuits.sampler import SamplerConfig
from rbm_circuits.seeding import substream
from rbm_circuits.state import RbmState


@pytest.fixture
def rng():
    return substream(1234, "tests")


@pytest.fixture
def small_state(rng):
    return RbmState.random(4, 4, rng, scale=0.3)


@pytest.fixture
def fast_sampler():
    return SamplerConfig(n_chains=4, burn_in_sweeps=20, samples_per_chain=64)


@pytest.fixture
def exact_learner():
    """Full-enumeration learner that converges on few-qubit states in a few hundred steps."""
    return LearnerConfig(
        n_iterations=300,
        learning_rate=0.05,
        adamax_beta2=0.9,
        overlap_check_interval=10,
        exact_enumeration=True,
    )
