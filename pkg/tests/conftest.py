import numpy as np
import pytest

from turbohse import generator


@pytest.fixture(scope="session")
def small_dataset():
    """Eight short trajectories across all four OCs; shared by fast tests."""
    cfg = generator.GenerationConfig(n_trajectories=8, max_len=250, base_seed=7)
    return generator.generate_dataset(cfg)


@pytest.fixture(scope="session")
def desk_dataset():
    """The default desk-scale dataset (50 trajectories, 1000 steps)."""
    cfg = generator.GenerationConfig(n_trajectories=50, max_len=1000, base_seed=42)
    return generator.generate_dataset(cfg)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
