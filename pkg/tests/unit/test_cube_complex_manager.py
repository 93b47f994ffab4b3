import math

import pytest

from bicomb.cube_complex_manager import (
    CESARO_GROWTH,
    build_cube_complex,
    carrier_cube,
    cesaro_block_sequence,
    complex_f,
    complex_f5,
    face_distance_floor,
    halfplane_complex,
    n_chain,
    point_type,
    subdivided_line,
    unit_square,
)
from bicomb.custom_types import ChartKind
from bicomb.exceptions import InvalidComplexError

SQRT2 = math.sqrt(2.0)


def test_complex_f_is_a_square_with_a_tail():
    cx = complex_f()
    assert cx.chart_ids == ["C1", "C2"]
    assert cx.atlas.chart("C1").kind == ChartKind.BOX
    assert cx.atlas.chart("C2").kind == ChartKind.INTERVAL
    assert len(cx.atlas.gluings) == 1
    assert cx.dim == 2


def test_square_and_tail_share_only_the_corner():
    atlas = complex_f().atlas
    assert atlas.same_point(atlas.point("C1", (0, 0)), atlas.point("C2", (0,)))
    assert not atlas.same_point(atlas.point("C1", (1, 0)), atlas.point("C2", (1,)))


def test_f5_glues_five_squares_around_a_vertex():
    cx = complex_f5()
    assert len(cx.chart_ids) == 5
    assert len(cx.atlas.gluings) == 10


def test_point_types_of_f():
    cx = complex_f()
    assert point_type(cx, cx.atlas.point("C1", (0, 0))).model_dump() == {"n": 2, "m": 0}
    assert point_type(cx, cx.atlas.point("C1", (0.5, 0.5))).model_dump() == {"n": 0, "m": 2}
    assert point_type(cx, cx.atlas.point("C2", (0.5,))).model_dump() == {"n": 0, "m": 1}


def test_carrier_cube_of_an_edge_point():
    cx = complex_f()
    assert carrier_cube(cx, cx.atlas.point("C1", (0.5, 0.0))) == ["a", "c"]


def test_face_distance_floor():
    cx = unit_square()
    assert face_distance_floor(cx, cx.atlas.point("C1", (0.25, 0.5)), 2.0) == pytest.approx(0.25)


def test_cubes_need_power_of_two_vertices():
    with pytest.raises(InvalidComplexError, match="2\\^d vertices"):
        build_cube_complex([["a", "b", "c"]])


def test_cubes_cannot_repeat_vertices():
    with pytest.raises(InvalidComplexError, match="repeats a vertex"):
        build_cube_complex([["a", "a"]])


def test_diagonal_is_not_a_face():
    with pytest.raises(InvalidComplexError, match="not a face"):
        build_cube_complex([["a", "b", "c", "d"], ["a", "d"]])


def test_subdivided_line():
    cx = subdivided_line(3)
    assert cx.chart_ids == ["L1", "L2", "L3"]
    assert len(cx.atlas.gluings) == 2
    with pytest.raises(InvalidComplexError, match="at least one cell"):
        subdivided_line(0)


def test_n_chain_mixes_edges_and_squares():
    cx = n_chain([1.0, SQRT2, 1.0], 3)
    assert [cx.atlas.dim(c) for c in cx.chart_ids] == [1, 2, 1]


def test_n_chain_rejects_other_entries():
    with pytest.raises(InvalidComplexError, match="1 or sqrt"):
        n_chain([1.0, 1.5], 2)


def test_n_chain_needs_enough_entries():
    with pytest.raises(InvalidComplexError, match="at least 3"):
        n_chain([1.0, 1.0], 3)


def test_halfplane_complex_charts():
    atlas = halfplane_complex([1.0, SQRT2], 2, "inf")
    assert sorted(atlas.charts) == ["C1xL1", "C1xL2", "C2xL1", "C2xL2"]
    assert atlas.dim("C2xL1") == 3


def test_cesaro_block_sequence_blocks():
    seq = cesaro_block_sequence(10, 8)
    assert len(seq) == 10
    assert seq[0] == 1.0
    assert seq[1:9] == [SQRT2] * 8
    assert seq[9] == 1.0


def test_cesaro_block_sequence_needs_growth():
    with pytest.raises(InvalidComplexError, match="growth >= 2"):
        cesaro_block_sequence(10, 1)


def test_cesaro_block_sequence_default_lengths():
    seq = cesaro_block_sequence(73)
    assert CESARO_GROWTH == 8
    assert seq == [1.0] + [SQRT2] * 8 + [1.0] * 64


def test_cesaro_block_sequence_doubling():
    assert cesaro_block_sequence(7, 2) == [1.0, SQRT2, SQRT2, 1.0, 1.0, 1.0, 1.0]
