import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nlsgap import SolitonParams, greens_weights, make_grid, solve_soliton  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20061016)


@pytest.fixture(scope="session")
def desk_grid():
    return make_grid(15.0, 60)


@pytest.fixture(scope="session")
def desk_green(desk_grid):
    return greens_weights(desk_grid)


@pytest.fixture(scope="session")
def desk_soliton(desk_grid):
    res = solve_soliton(desk_grid, SolitonParams(beta=1.0))
    assert res.converged
    return res
