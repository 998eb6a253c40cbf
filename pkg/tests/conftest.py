import numpy as np
import pytest

from memmunmix.core import SpectralBundles
from memmunmix.simgen import SimConfig, generate_bundles


def random_bundles(rng, sizes=(2, 3, 2), n_bands=8):
    atoms = rng.uniform(0.05, 1.0, size=(n_bands, sum(sizes)))
    return SpectralBundles(atoms, tuple(sizes))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_sim_bundles():
    """K=5, N_k=5 synthetic library."""
    return generate_bundles(SimConfig(seed=3, n_classes=5, atoms_per_class=5, n_bands=64))
