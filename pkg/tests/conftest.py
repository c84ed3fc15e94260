import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from colortraj import dataset, synth

settings.register_profile(
    "default", max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def cookie_records():
    """Default cookie world (seed 0), preprocessed at the default cutoff."""
    return dataset.preprocess(synth.generate_dataset(synth.cookie_world(seed=0)))


@pytest.fixture(scope="session")
def small_records():
    """A small, fast world: 3 samples per cookie condition."""
    cfg = synth.cookie_world(seed=3, samples_per_condition=3)
    return dataset.preprocess(synth.generate_dataset(cfg))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
