import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from graphnls.graph import Potential, line, star
from graphnls.mesh import build_mesh
from graphnls.operators import assemble

settings.register_profile("graphnls", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("graphnls")


@pytest.fixture(scope="session")
def line_fine():
    """Truncated line at the resolution used by the reproduction criteria."""
    mesh = build_mesh(line(), 0.01, 40.0)
    return mesh, assemble(mesh)


@pytest.fixture(scope="session")
def star_delta():
    g = star(3, alpha=-1.0)
    mesh = build_mesh(g, 0.01, 40.0)
    return g, mesh, assemble(mesh)


@pytest.fixture(scope="session")
def well_star():
    """3-star with an attractive vertex and a Gaussian well on one edge."""
    return star(3, alpha=-1.0, potentials=[None, Potential.gaussian_well(1.0, 1.0, 2.0), None])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
