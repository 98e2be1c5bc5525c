import warnings

import numpy as np
import pytest

import solwave as sw

# coarse-box charges warn about truncated tails and degraded decay class;
# the tests that care assert on the reports directly
warnings.filterwarnings("ignore", message=".*truncates the charge tail.*")
warnings.filterwarnings("ignore", message=".*decay class degraded.*")
warnings.filterwarnings("ignore", message=".*wave-wrap horizon.*")
warnings.filterwarnings("ignore", message=".*wraps around the periodic box.*")


@pytest.fixture(scope="session")
def grid64():
    return sw.Grid3(64, 16.0)


@pytest.fixture(scope="session")
def rho64(grid64):
    return sw.make_admissible_density(1.0, 0.25, grid64)


@pytest.fixture(scope="session")
def grid48():
    return sw.Grid3(48, 12.0)


@pytest.fixture(scope="session")
def rho48(grid48):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sw.make_admissible_density(1.0, 0.25, grid48)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)


def smooth_state(grid, seed=5, scale=1.0):
    """A localized smooth random phase-space point for generic tests."""
    rng = np.random.default_rng(seed)
    X, Y, Z = grid.xmesh()
    env = np.exp(-(X**2 + Y**2 + Z**2) / 4.0)
    psi = scale * env * (
        np.cos(0.7 * X + 0.2 * Y) + 0.3 * np.sin(0.4 * Z - 0.8 * X)
    )
    pi = scale * env * (np.sin(0.5 * Z - 0.3 * X) + 0.2 * np.cos(0.9 * Y))
    return sw.PhaseState(
        sw.FieldPair(grid, psi, pi),
        rng.standard_normal(3) * 0.3,
        rng.standard_normal(3) * 0.3,
    )


def smooth_linstate(grid, seed=5, scale=1.0):
    y = smooth_state(grid, seed=seed, scale=scale)
    return sw.LinState(y.fields, y.q, y.p)
