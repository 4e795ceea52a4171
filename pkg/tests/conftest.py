import numpy as np
import pytest

from muentropy.polytope import blowup_cp2, segment, square, unit_square


@pytest.fixture(scope="session")
def bl():
    return blowup_cp2()


@pytest.fixture(scope="session")
def sq():
    return square()


@pytest.fixture(scope="session")
def usq():
    return unit_square()


@pytest.fixture(scope="session")
def seg():
    return segment()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def vertex_id(S, point):
    V = S.polytope.vertices
    return int(np.argmin(np.linalg.norm(V - np.asarray(point, float), axis=1)))


def interior_points(S, rng, count, margin=1e-3):
    """Random points strictly inside P (Dirichlet mixtures of vertices pulled to the centroid)."""
    V = S.polytope.vertices
    w = rng.dirichlet(np.ones(len(V)), size=count)
    x = w @ V
    return (1 - margin) * x + margin * S.polytope.centroid
