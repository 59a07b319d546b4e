import numpy as np
import pytest

from heatbounds import (
    BathParams,
    OhmicExpCutoff,
    bounds_from_trajectories,
    evolve,
    evolve_with_sensitivity,
)

# the standard weak-coupling parameter set used throughout the tests
COUPLING = 0.1
CUTOFF = 0.4
BETA = 1.0


@pytest.fixture(scope="session")
def ohmic():
    return OhmicExpCutoff(COUPLING, CUTOFF)


@pytest.fixture(scope="session")
def bath():
    return BathParams(BETA)


@pytest.fixture(scope="session")
def trajectory_pair(ohmic, bath):
    """Factory: (eta=0 with sensitivity, eta=beta) pair for one initial state."""
    cache = {}

    def build(initial, t_final=50.0, n_samples=501):
        key = (tuple(initial), t_final, n_samples)
        if key not in cache:
            grid = np.linspace(0.0, t_final, n_samples)
            traj0 = evolve_with_sensitivity(
                initial, ohmic, bath, t_final=t_final, report_grid=grid
            )
            traj_b = evolve(
                initial, BETA, ohmic, bath, t_final=t_final, report_grid=grid
            )
            cache[key] = (traj0, traj_b)
        return cache[key]

    return build


@pytest.fixture(scope="session")
def bounds_028(trajectory_pair):
    traj0, traj_b = trajectory_pair((0.0, 0.0, 0.28))
    return bounds_from_trajectories(traj0, traj_b, BETA)


@pytest.fixture(scope="session")
def bounds_m05(trajectory_pair):
    traj0, traj_b = trajectory_pair((0.0, 0.0, -0.5))
    return bounds_from_trajectories(traj0, traj_b, BETA)
