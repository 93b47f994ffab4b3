import math

import numpy as np
import pytest

from bicomb.exceptions import MalformedInputError
from bicomb.lp_geometry import (
    P_INF,
    as_coord_vec,
    chamfer_distortion,
    lerp,
    lp_distance,
    lp_dual,
    lp_norm,
    lp_norms,
    p_label,
    parse_p,
)


def test_parse_p_accepts_infinity_spellings():
    assert parse_p("inf") is P_INF
    assert parse_p("∞") is P_INF
    assert parse_p(float("inf")) is P_INF


def test_parse_p_reads_numbers():
    assert parse_p(2) == 2.0
    assert parse_p(" 2.5 ") == 2.5


def test_parse_p_rejects_p_below_one():
    with pytest.raises(MalformedInputError, match="must lie in"):
        parse_p(0.5)


def test_parse_p_rejects_text():
    with pytest.raises(MalformedInputError, match="cannot read"):
        parse_p("two")


def test_p_label():
    assert p_label(2.0) == "2"
    assert p_label(1.5) == "1.5"
    assert p_label(P_INF) == "inf"


def test_lp_dual():
    assert lp_dual(1.0) is P_INF
    assert lp_dual(P_INF) == 1.0
    assert lp_dual(2.0) == 2.0
    assert lp_dual(3.0) == pytest.approx(1.5)


def test_lp_norm_for_standard_exponents():
    assert lp_norm((3.0, 4.0), 2.0) == pytest.approx(5.0)
    assert lp_norm((3.0, -4.0), 1.0) == pytest.approx(7.0)
    assert lp_norm((3.0, -4.0), P_INF) == pytest.approx(4.0)
    assert lp_norm([], 2.0) == 0.0


def test_lp_norms_row_wise():
    norms = lp_norms(np.array([[3.0, 4.0], [1.0, 1.0]]), 1.0)
    assert norms.tolist() == [7.0, 2.0]


def test_lp_distance():
    assert lp_distance(np.array([1.0, 1.0]), np.array([4.0, 5.0]), 2.0) == pytest.approx(5.0)


def test_lerp_endpoints_and_midpoint():
    a, b = np.array([0.0, 2.0]), np.array([4.0, 0.0])
    assert lerp(a, b, 0.0).tolist() == [0.0, 2.0]
    assert lerp(a, b, 1.0).tolist() == [4.0, 0.0]
    assert lerp(a, b, 0.5).tolist() == [2.0, 1.0]


def test_lerp_rejects_mismatched_dimensions():
    with pytest.raises(MalformedInputError, match="interpolate"):
        lerp(np.zeros(2), np.zeros(3), 0.5)


def test_as_coord_vec_validates_entries():
    assert as_coord_vec([1, 2], dim=2).tolist() == [1.0, 2.0]
    with pytest.raises(MalformedInputError, match="non-empty"):
        as_coord_vec([])
    with pytest.raises(MalformedInputError, match="non-finite"):
        as_coord_vec([1.0, math.nan])
    with pytest.raises(MalformedInputError, match="expected 3 coordinates"):
        as_coord_vec([1.0, 2.0], dim=3)


def test_chamfer_distortion():
    assert chamfer_distortion(1.0, 2) == pytest.approx(1.0)
    assert chamfer_distortion(P_INF, 2) == pytest.approx(1.0)
    assert chamfer_distortion(2.0, 2) == pytest.approx(math.sqrt(1.0 + (math.sqrt(2.0) - 1.0) ** 2))


def test_chamfer_distortion_needs_a_dimension():
    with pytest.raises(MalformedInputError, match="dimension"):
        chamfer_distortion(2.0, 0)
