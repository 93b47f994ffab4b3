import pytest

from bicomb.atlas_manager import (
    ChartAtlas,
    apply_isometry,
    build_ck_patch,
    build_lsp,
    describe_space,
    gluing_path_length,
    line_gluing,
    lp_product,
    plane,
    product_point,
    split_product_point,
)
from bicomb.custom_types import ChartKind
from bicomb.cube_complex_manager import unit_interval
from bicomb.exceptions import InvalidGluingError, MalformedInputError
from bicomb.models import ChartMap, GluingFlat, GluingIdentification, IsometrySpec


def test_build_lsp_layouts():
    assert list(build_lsp(1).charts) == ["P1"]
    assert list(build_lsp(4).charts) == ["P1", "P2", "P3"]
    assert len(build_lsp(5).gluings) == 2


def test_build_lsp_rejects_unknown_index():
    with pytest.raises(MalformedInputError, match="no lsp6"):
        build_lsp(6)


def test_points_on_the_gluing_line_are_identified(axis_pair):
    x = axis_pair.point("P2", (1.5, 0.0))
    assert [str(twin) for twin in axis_pair.equivalents(x)] == ["P1:1.5,0", "P2:1.5,0"]
    assert axis_pair.canonicalize(x).chart == "P1"


def test_points_off_the_gluing_line_stay_put(axis_pair):
    x = axis_pair.point("P2", (1.5, 0.5))
    assert axis_pair.equivalents(x) == [x]


def test_diagonal_gluing_identifies_diagonal_points():
    atlas = build_lsp(3)
    assert atlas.same_point(atlas.point("P2", (1.0, 1.0)), atlas.point("P1", (1.0, 1.0)))
    assert not atlas.same_point(atlas.point("P2", (1.0, 0.0)), atlas.point("P1", (1.0, 0.0)))


def test_shared_chart_uses_the_least_chart(axis_pair):
    shared = axis_pair.shared_chart(axis_pair.point("P1", (0, 1)), axis_pair.point("P2", (1, 0)))
    chart, a, b = shared
    assert chart == "P1"
    assert a.tolist() == [0.0, 1.0]
    assert b.tolist() == [1.0, 0.0]


def test_no_shared_chart_across_the_gluing(axis_pair):
    assert axis_pair.shared_chart(
        axis_pair.point("P1", (0, 1)), axis_pair.point("P2", (0, 1))
    ) is None


def test_point_outside_a_bounded_chart(complex_f_space):
    with pytest.raises(MalformedInputError, match="outside chart C1"):
        complex_f_space.point("C1", (2.0, 0.0))


def test_unknown_chart(axis_pair):
    with pytest.raises(MalformedInputError, match="unknown chart P9"):
        axis_pair.point("P9", (0.0, 0.0))


def test_duplicate_chart_ids():
    with pytest.raises(MalformedInputError, match="declared twice"):
        ChartAtlas([plane("A"), plane("A")], [])


def test_gluing_to_unknown_chart():
    with pytest.raises(InvalidGluingError, match="unknown chart B"):
        ChartAtlas([plane("A")], [line_gluing("A", "B", (0, 0), (0, 0), (1, 0))])


def test_gluing_must_be_isometric():
    gluing = GluingIdentification(
        chart_a="A",
        chart_b="B",
        flat_a=GluingFlat(basepoint=[0.0, 0.0], directions=[[1.0, 0.0]]),
        flat_b=GluingFlat(basepoint=[0.0, 0.0], directions=[[1.0, 1.0]]),
    )
    with pytest.raises(InvalidGluingError, match="not isometric"):
        ChartAtlas([plane("A"), plane("B")], [gluing])


def test_gluing_a_chart_to_itself():
    with pytest.raises(InvalidGluingError, match="with itself"):
        ChartAtlas([plane("A")], [line_gluing("A", "A", (0, 0), (0, 1), (1, 0))])


def test_describe_space():
    summary = describe_space(build_lsp(4))
    assert summary.charts == 3
    assert summary.gluings == 2
    assert summary.max_degree == 2
    assert summary.bounded is False
    assert summary.dims == [2]


def test_ck_patch_size():
    assert len(build_ck_patch(90, 1).charts) == 7


def test_ck_patch_rejects_other_angles():
    with pytest.raises(MalformedInputError, match="45 or 90"):
        build_ck_patch(60, 1)


def test_lp_product_of_intervals_is_a_box():
    interval = unit_interval().atlas
    square = lp_product(interval, interval, 2.0)
    assert list(square.charts) == ["C1xC1"]
    assert square.chart("C1xC1").kind == ChartKind.BOX
    assert square.bounded


def test_product_point_splits_back():
    interval = unit_interval().atlas
    square = lp_product(interval, interval, 2.0)
    x = product_point(square, interval.point("C1", (0.25,)), interval.point("C1", (0.75,)))
    assert x.coords == (0.25, 0.75)
    first, second = split_product_point(square, x)
    assert first.coords == (0.25,)
    assert second.coords == (0.75,)


def test_product_point_needs_a_product(axis_pair):
    x = axis_pair.point("P1", (0, 0))
    with pytest.raises(MalformedInputError, match="product atlas"):
        product_point(axis_pair, x, x)


def test_apply_isometry_translates(plane):
    shift = IsometrySpec(
        name="shift",
        maps=[ChartMap(source="P1", target="P1", matrix=[[1, 0], [0, 1]], offset=[1, -2])],
    )
    assert apply_isometry(plane, shift, plane.point("P1", (0, 0))).coords == (1.0, -2.0)


def test_apply_isometry_must_cover_the_point(axis_pair):
    only_p1 = IsometrySpec(
        maps=[ChartMap(source="P1", target="P1", matrix=[[1, 0], [0, 1]], offset=[0, 0])]
    )
    with pytest.raises(MalformedInputError, match="does not cover"):
        apply_isometry(axis_pair, only_p1, axis_pair.point("P2", (0, 1)))


def test_gluing_path_length(axis_pair):
    pts = [
        axis_pair.point("P1", (0, 1)),
        axis_pair.point("P1", (1, 0)),
        axis_pair.point("P2", (2, 1)),
    ]
    assert gluing_path_length(axis_pair, pts, ["P1", "P2"], 2.0) == pytest.approx(2 * 2**0.5)
    assert gluing_path_length(axis_pair, pts, ["P1", "P2"], 1.0) == pytest.approx(4.0)


def test_gluing_path_needs_shared_charts(axis_pair):
    pts = [axis_pair.point("P1", (0, 1)), axis_pair.point("P2", (2, 1))]
    with pytest.raises(MalformedInputError, match="not both in chart P1"):
        gluing_path_length(axis_pair, pts, ["P1"], 2.0)
    with pytest.raises(MalformedInputError, match="one chart per consecutive pair"):
        gluing_path_length(axis_pair, pts, [], 2.0)
