"""
Shared fixtures for pokelab tests
"""
import shutil
import tempfile
from pathlib import Path
import numpy as np
import pytest
from pokelab.datastore.base import ArrayDataset
from pokelab.datastore.generate import iter_interactions
from pokelab.dynamics.network import PokeModel
from pokelab.model import ArenaParams


@pytest.fixture
def temp_dir():
    """Temporary directory removed after the test"""
    path = Path(tempfile.mkdtemp())
    yield path
    if path.exists():
        shutil.rmtree(path)


@pytest.fixture
def arena():
    return ArenaParams()


@pytest.fixture
def small_arena():
    """Smallest arena the encoder accepts; keeps network tests fast."""
    return ArenaParams(arena_size=36)


@pytest.fixture
def tiny_dataset(small_arena):
    stored = small_arena.float32_rounded()
    rows = [r.to_row() for r in iter_interactions(64, 3, stored)]
    return ArrayDataset(np.asarray(rows, dtype=np.float64), stored)


@pytest.fixture
def random_model(small_arena):
    return PokeModel.create(small_arena, latent_dim=16, seed=0)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))
