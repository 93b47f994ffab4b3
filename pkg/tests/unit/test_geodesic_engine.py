import math

import numpy as np
import pytest

from bicomb.atlas_manager import build_lsp
from bicomb.bicombing_verifier import reflection
from bicomb.custom_types import BicombingMethod
from bicomb.exceptions import MalformedInputError
from bicomb.geodesic_engine import (
    BicombingHandle,
    assemble_path,
    distance,
    enumerate_routes,
    geodesic,
    involution_fixed_point,
    local_geodesic_check,
    midpoint,
    midpoint_trace,
    path_length,
    point_at_arclength,
    reversibilize,
    sigma_eval,
    trajectory_hausdorff,
)
from bicomb.lp_geometry import P_INF
from bicomb.models import EngineOptions

SQRT2 = math.sqrt(2.0)


@pytest.mark.parametrize("p, expected", [(1.0, 7.0), (2.0, 5.0), (P_INF, 4.0)])
def test_distance_inside_one_plane(plane, p, expected):
    assert distance(plane, plane.point("P1", (0, 0)), plane.point("P1", (3, 4)), p) == (
        pytest.approx(expected)
    )


@pytest.mark.parametrize("p", [1.0, 2.0, P_INF])
def test_distance_straight_across_the_axis(axis_pair, p):
    x, y = axis_pair.point("P1", (0, 1)), axis_pair.point("P2", (0, 1))
    assert distance(axis_pair, x, y, p) == pytest.approx(2.0, abs=1e-9)


@pytest.mark.parametrize("p, expected", [(1.0, 4.0), (2.0, 2.0 * SQRT2), (P_INF, 2.0)])
def test_distance_diagonally_across_the_axis(axis_pair, p, expected):
    x, y = axis_pair.point("P1", (0, 1)), axis_pair.point("P2", (2, 1))
    assert distance(axis_pair, x, y, p) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("p, expected", [(1.0, 3.0), (2.0, 1.0 + SQRT2), (P_INF, 2.0)])
def test_distance_through_a_cube_vertex(complex_f_space, p, expected):
    e, d = complex_f_space.point("C2", (1,)), complex_f_space.point("C1", (1, 1))
    assert distance(complex_f_space, e, d, p) == pytest.approx(expected)


def test_distance_is_symmetric(axis_pair):
    x, y = axis_pair.point("P1", (0.3, 1.2)), axis_pair.point("P2", (-1.1, 0.4))
    assert distance(axis_pair, x, y, 2.0) == distance(axis_pair, y, x, 2.0)


def test_geodesic_crosses_where_the_l2_path_does(axis_pair):
    path = geodesic(axis_pair, axis_pair.point("P1", (0, 1)), axis_pair.point("P2", (2, 1)), 2.0)
    assert path.chart_seq == ["P1", "P2"]
    assert np.allclose(path.breakpoints[1].vec, [1.0, 0.0], atol=1e-5)
    assert path.lengths["2"] == pytest.approx(2.0 * SQRT2, abs=1e-9)
    assert path.lengths["inf"] == pytest.approx(2.0, abs=1e-5)
    assert path.lengths["1"] == pytest.approx(4.0, abs=1e-9)


def test_l2_trajectory_certified_for_linf(axis_pair):
    path = geodesic(
        axis_pair, axis_pair.point("P1", (0, 1)), axis_pair.point("P2", (2, 1)), P_INF
    )
    assert path.p == P_INF
    assert path.method == BicombingMethod.CAT0_TRAJECTORY
    assert path_length(path, P_INF) == pytest.approx(2.0, abs=1e-5)


def test_geodesic_between_equal_points(axis_pair):
    x = axis_pair.point("P2", (1, 0))
    path = geodesic(axis_pair, x, axis_pair.point("P1", (1, 0)), 2.0)
    assert path.segments == []
    assert set(path.lengths.values()) == {0.0}


def test_geodesic_refuses_handle_only_methods(axis_pair):
    x, y = axis_pair.point("P1", (0, 1)), axis_pair.point("P2", (0, 1))
    with pytest.raises(MalformedInputError, match="only via a handle"):
        geodesic(axis_pair, x, y, 2.0, method=BicombingMethod.CORRUPTED)


def test_assemble_path_drops_empty_pieces(axis_pair):
    x, y = axis_pair.point("P1", (0, 1)), axis_pair.point("P2", (2, 1))
    pieces = [
        ("P1", np.array([0.0, 1.0]), np.array([1.0, 0.0])),
        ("P2", np.array([1.0, 0.0]), np.array([1.0, 0.0])),
        ("P2", np.array([1.0, 0.0]), np.array([2.0, 1.0])),
    ]
    path = assemble_path(axis_pair, x, y, pieces, 2.0, BicombingMethod.CAT0_TRAJECTORY)
    assert path.chart_seq == ["P1", "P2"]
    assert str(path.breakpoints[1]) == "P1:1,0"


def test_point_at_arclength(plane):
    path = geodesic(plane, plane.point("P1", (0, 0)), plane.point("P1", (3, 4)), 2.0)
    assert point_at_arclength(plane, path, 2.5, 2.0).coords == pytest.approx((1.5, 2.0))
    assert point_at_arclength(plane, path, 99.0, 2.0).coords == (3.0, 4.0)


def test_handle_eval(plane_handle, plane):
    x, y = plane.point("P1", (0, 0)), plane.point("P1", (2, 2))
    assert plane_handle.eval(x, y, 0.5).coords == pytest.approx((1.0, 1.0))
    assert plane_handle.eval(x, y, 0.0) == x
    with pytest.raises(MalformedInputError, match="outside \\[0, 1\\]"):
        plane_handle.eval(x, y, 1.5)


def test_handle_describe(plane_handle):
    assert plane_handle.describe() == {"method": "cat0-trajectory", "p": "2", "space": "lsp1"}


def test_midpoint_trace_halves_in_one_step(plane_handle, plane):
    point, gaps = midpoint_trace(plane_handle, plane.point("P1", (0, 0)), plane.point("P1", (2, 0)))
    assert point.coords == pytest.approx((1.0, 0.0))
    assert gaps == pytest.approx([2.0, 0.0])


def test_reversibilized_handle_agrees_on_the_plane(plane_handle, plane):
    x, y = plane.point("P1", (0, 0)), plane.point("P1", (2, 0))
    handle = reversibilize(plane_handle)
    assert handle.method == BicombingMethod.MIDPOINT_REVERSIBILIZED
    assert handle.eval(x, y, 0.25).coords == pytest.approx((0.5, 0.0))
    assert handle.describe()["base"]["method"] == "cat0-trajectory"


def test_enumerate_routes_through_the_middle_plane():
    atlas = build_lsp(4)
    routes = enumerate_routes(atlas, ["P1"], ["P3"], EngineOptions())
    assert [(r.charts, r.gluings) for r in routes] == [(("P1", "P2", "P3"), (0, 1))]


def test_local_geodesic_check_on_a_geodesic(axis_pair):
    path = geodesic(axis_pair, axis_pair.point("P1", (0, 1)), axis_pair.point("P2", (2, 1)), 2.0)
    verdict = local_geodesic_check(axis_pair, path, 2.0, 0.1, windows=8)
    assert verdict.ok


def test_local_geodesic_check_needs_positive_eps(axis_pair):
    path = geodesic(axis_pair, axis_pair.point("P1", (0, 1)), axis_pair.point("P2", (2, 1)), 2.0)
    with pytest.raises(MalformedInputError, match="eps must be positive"):
        local_geodesic_check(axis_pair, path, 2.0, 0.0)


def test_trajectory_hausdorff_of_parallel_segments(plane):
    first = geodesic(plane, plane.point("P1", (0, 0)), plane.point("P1", (2, 0)), 2.0)
    second = geodesic(plane, plane.point("P1", (0, 1)), plane.point("P1", (2, 1)), 2.0)
    assert trajectory_hausdorff(plane, first, second, 2.0, per_segment=8) == pytest.approx(1.0)


def test_handle_caches_geodesics(axis_pair):
    handle = BicombingHandle(axis_pair, 2.0)
    x, y = axis_pair.point("P1", (0, 1)), axis_pair.point("P2", (2, 1))
    assert handle.geodesic(x, y) is handle.geodesic(x, y)


def test_sigma_eval_and_midpoint(plane, plane_handle):
    x, y = plane.point("P1", (0, 0)), plane.point("P1", (2, 2))
    assert sigma_eval(plane_handle, x, y, 0.25).coords == pytest.approx((0.5, 0.5))
    assert midpoint(plane_handle, x, y).coords == pytest.approx((1.0, 1.0))


def test_involution_fixed_point_lands_on_the_axis(axis_pair):
    handle = BicombingHandle(axis_pair, 2.0)
    flip = reflection(axis_pair, "P2")
    fixed = involution_fixed_point(handle, flip, axis_pair.point("P2", (1, 1)))
    assert axis_pair.same_point(fixed, axis_pair.point("P1", (1, 0)))
