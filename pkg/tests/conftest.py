import numpy as np
import pytest

from hdgcontrol.mesh import build_box_mesh


def random_data(rng, dim):
    """Smooth random closed-form (f, y_d) pair."""
    a = rng.normal(size=4)
    w = rng.uniform(0.5, 3.0, size=(2, dim))

    def f(x):
        return a[0] + a[1] * np.sin(x @ w[0]) + a[2] * x[..., 0] ** 2

    def y_d(x):
        return a[3] * np.cos(x @ w[1]) + x[..., -1]

    return f, y_d


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    nb = np.linalg.norm(b)
    return np.linalg.norm(a - b) / (nb if nb > 0 else 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def square2():
    """Unit square split into two triangles."""
    return build_box_mesh(2, (0, 0), (1, 1), 0)


@pytest.fixture(scope="session")
def mesh2d():
    return build_box_mesh(2, (0, 0), (1, 1), 2)


@pytest.fixture(scope="session")
def mesh3d():
    return build_box_mesh(3, (0, 0, 0), (1, 1, 1), 1)
