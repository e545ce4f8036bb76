import numpy as np
import pytest

from wavetraj.catalog import build_manifold, build_potential


def box_grid(lo, hi, shape):
    """Uniform box grid as rows of chart points."""
    axes = [np.linspace(lo[i], hi[i], shape[i]) for i in range(len(lo))]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@pytest.fixture
def euclidean2():
    return build_manifold("euclidean", {"n": 2})


@pytest.fixture
def euclidean1():
    return build_manifold("euclidean", {"n": 1})


@pytest.fixture
def hyperbolic():
    return build_manifold("hyperbolic_half_plane", {})


@pytest.fixture
def harmonic():
    return build_potential("harmonic", {})


@pytest.fixture
def free():
    return build_potential("zero", {})
