import pytest

from bicomb.atlas_manager import build_lsp
from bicomb.cube_complex_manager import complex_f
from bicomb.geodesic_engine import BicombingHandle
from bicomb.sampler import PointSampler


@pytest.fixture
def plane():
    return build_lsp(1)


@pytest.fixture
def axis_pair():
    """Two planes glued along their x-axes."""
    return build_lsp(2)


@pytest.fixture
def complex_f_space():
    return complex_f().atlas


@pytest.fixture
def plane_handle(plane):
    return BicombingHandle(plane, 2.0)


@pytest.fixture
def plane_sampler(plane):
    return PointSampler(plane, seed=7, radius=2.0)
