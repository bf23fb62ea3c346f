import numpy as np
import pytest

from tidysim import FactorSpec, GridSpec, expand_grid


@pytest.fixture
def small_spec():
    return GridSpec(
        factors=(
            FactorSpec("x", "integer", (1, 2)),
            FactorSpec("y", "categorical", ("a", "b", "c")),
        ),
        iterations=2,
        master_seed=7,
    )


@pytest.fixture
def small_grid(small_spec):
    return expand_grid(small_spec)


@pytest.fixture
def rng_seeds():
    return np.random.RandomState(20250808)
