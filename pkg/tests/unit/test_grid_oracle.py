import math
from unittest.mock import patch

import pytest

from bicomb.exceptions import MalformedInputError
from bicomb.geodesic_engine import distance
from bicomb.grid_oracle import anchor_path_length, grid_oracle_distance, oracle_error_bound
from bicomb.lp_geometry import P_INF


def test_error_bound_without_distortion():
    assert oracle_error_bound(P_INF, 2, 3.0, 0.25, 2) == pytest.approx(2.0 * 0.25 * 4)
    assert oracle_error_bound(1.0, 2, 3.0, 0.25, 2) == pytest.approx(2.0 * 0.5 * 4)


def test_error_bound_grows_with_distance_for_l2():
    assert oracle_error_bound(2.0, 2, 10.0, 0.1, 1) > oracle_error_bound(2.0, 2, 1.0, 0.1, 1)


@pytest.mark.parametrize("p", [P_INF, 2.0])
def test_oracle_brackets_the_engine_across_the_axis(axis_pair, p):
    x, y = axis_pair.point("P1", (0, 1)), axis_pair.point("P2", (2, 1))
    exact = distance(axis_pair, x, y, p)
    oracle = grid_oracle_distance(axis_pair, x, y, p, resolution=0.25)
    assert exact - 1e-9 <= oracle <= exact + oracle_error_bound(p, 2, exact, 0.25, 8)


def test_oracle_is_exact_on_lattice_points_for_linf(plane):
    x, y = plane.point("P1", (0, 0)), plane.point("P1", (1, 0.5))
    assert grid_oracle_distance(plane, x, y, P_INF, resolution=0.25) == pytest.approx(1.0)


def test_oracle_of_a_point_with_itself(axis_pair):
    x = axis_pair.point("P1", (1, 0))
    assert grid_oracle_distance(axis_pair, x, axis_pair.point("P2", (1, 0)), 2.0) == 0.0


def test_oracle_needs_a_positive_resolution(plane):
    x, y = plane.point("P1", (0, 0)), plane.point("P1", (1, 0))
    with pytest.raises(MalformedInputError, match="resolution must be positive"):
        grid_oracle_distance(plane, x, y, 2.0, resolution=0.0)


def test_anchor_path_crosses_at_the_flat_basepoint(axis_pair):
    x, y = axis_pair.point("P1", (0, 1)), axis_pair.point("P2", (2, 1))
    assert anchor_path_length(axis_pair, x, y, 2.0) == pytest.approx(1.0 + math.sqrt(5.0))
    assert anchor_path_length(axis_pair, x, y, P_INF) == pytest.approx(3.0)
    assert anchor_path_length(axis_pair, x, y, 2.0) >= distance(axis_pair, x, y, 2.0)


def test_anchor_path_within_one_chart(plane):
    x, y = plane.point("P1", (0, 0)), plane.point("P1", (3, 4))
    assert anchor_path_length(plane, x, y, 2.0) == pytest.approx(5.0)


def test_oracle_window_does_not_need_the_engine_distance(axis_pair):
    x, y = axis_pair.point("P1", (0, 1)), axis_pair.point("P2", (2, 1))
    with patch("bicomb.grid_oracle.anchor_path_length", wraps=anchor_path_length) as sizing:
        oracle = grid_oracle_distance(axis_pair, x, y, P_INF, resolution=0.25)
    sizing.assert_called_once()
    assert oracle == pytest.approx(2.0)
