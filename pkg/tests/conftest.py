import numpy as np
import pytest
from types import SimpleNamespace

from toruspatterns import (
    TorusParams, ProfileConfig, PeriodicGrid,
    build_profile, forge_nonlinearity, extend_symmetric, threshold_waves,
    assemble_laplacian, newton_solve, load_config, Pipeline,
)


@pytest.fixture(scope="session")
def params5():
    """Reference geometry used by the pointwise examples."""
    return TorusParams(R=5.0, r=1.0)


@pytest.fixture(scope="session")
def setup_small():
    """Stable default construction on a small grid for module tests."""
    params = TorusParams(R=5.0, r=1.0, epsilon=0.0, n_waves=40)
    profile = build_profile(ProfileConfig(phi0=1.92, steepness=3.8,
                                          height=1.0, samples=2001), params)
    nl = forge_nonlinearity(profile, params)
    pattern = extend_symmetric(profile)
    grid = PeriodicGrid(64, 160)
    op = assemble_laplacian(params, grid)
    base = newton_solve(pattern.sample_field(grid), op, nl, tol=1e-10)
    return SimpleNamespace(params=params, profile=profile, nl=nl,
                           pattern=pattern, grid=grid, op=op, base=base,
                           threshold=threshold_waves(nl, params))


@pytest.fixture(scope="session")
def default_pipeline():
    """The shipped default configuration, shared across the acceptance suite."""
    return Pipeline(load_config("default"))


def rng(seed=0):
    return np.random.default_rng(seed)
