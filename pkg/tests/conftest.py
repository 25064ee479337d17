import numpy as np
import pytest

from bidomain.conductivity import default_params
from bidomain.mesh import build_cube_mesh, build_heart_torso_2d, build_square_mesh
from bidomain.system import BidomainSystem


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


@pytest.fixture(scope="session")
def coupled_2d_mesh():
    return build_heart_torso_2d(8)


@pytest.fixture(scope="session")
def isolated_2d_mesh():
    return build_square_mesh(4)


@pytest.fixture(scope="session")
def cube_mesh():
    return build_cube_mesh(2)


@pytest.fixture(scope="session")
def coupled_2d_system(coupled_2d_mesh):
    return BidomainSystem.build(coupled_2d_mesh, default_params(2), dt=0.05)


@pytest.fixture(scope="session")
def isolated_2d_system(isolated_2d_mesh):
    return BidomainSystem.build(isolated_2d_mesh, default_params(2), dt=0.05)


@pytest.fixture(scope="session")
def cube_system(cube_mesh):
    return BidomainSystem.build(cube_mesh, default_params(3), dt=0.2)


@pytest.fixture(scope="session")
def all_systems(coupled_2d_system, isolated_2d_system, cube_system):
    return {
        "2d-coupled": coupled_2d_system,
        "2d-isolated": isolated_2d_system,
        "3d-isolated": cube_system,
    }
