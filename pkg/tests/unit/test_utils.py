import pytest

from bicomb.utils import natural_key, parse_point_arg, rounded_key, run_concurrently


def test_natural_key_orders_numbered_charts():
    assert sorted(["P10", "P2", "P1"], key=natural_key) == ["P1", "P2", "P10"]


def test_rounded_key_drops_float_noise():
    assert rounded_key((0.1 + 0.2, -0.0)) == (0.3, 0.0)


def test_run_concurrently_keeps_input_order():
    assert run_concurrently(lambda x: x * x, [3, 1, 2], max_workers=3) == [9, 1, 4]


def test_run_concurrently_on_nothing():
    assert run_concurrently(lambda x: x, []) == []


def test_parse_point_arg():
    assert parse_point_arg("P1:0.5,-1") == ("P1", [0.5, -1.0])


def test_parse_point_arg_needs_a_chart():
    with pytest.raises(ValueError, match="must look like"):
        parse_point_arg("0.5,1")


def test_parse_point_arg_rejects_text_coordinates():
    with pytest.raises(ValueError, match="non-numeric"):
        parse_point_arg("P1:a,b")
