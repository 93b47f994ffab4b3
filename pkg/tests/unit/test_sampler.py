import pytest

from bicomb.exceptions import MalformedInputError
from bicomb.sampler import PointSampler


def test_draws_are_keyed_by_index(plane):
    first = PointSampler(plane, seed=11)
    second = PointSampler(plane, seed=11)
    assert first.points(5, 3) == second.points(5, 3)
    assert first.points(5, 3) != first.points(6, 3)


def test_draws_depend_on_the_seed(plane):
    assert PointSampler(plane, seed=1).points(0, 2) != PointSampler(plane, seed=2).points(0, 2)


def test_points_stay_inside_the_radius(plane):
    sampler = PointSampler(plane, seed=3, radius=0.5)
    for x in sampler.points(0, 50):
        assert max(abs(c) for c in x.coords) <= 0.5


def test_points_respect_chart_bounds(complex_f_space):
    sampler = PointSampler(complex_f_space, seed=3, radius=2.0)
    for x in sampler.points(0, 50):
        assert all(0.0 <= c <= 1.0 for c in x.coords)


def test_points_are_canonical(axis_pair):
    sampler = PointSampler(axis_pair, seed=5)
    for x in sampler.points(0, 20):
        assert axis_pair.canonicalize(x) == x


def test_sampling_restricted_to_charts(axis_pair):
    sampler = PointSampler(axis_pair, seed=5, charts=["P2"])
    assert {x.chart for x in sampler.points(0, 20)} == {"P2"}


def test_times_are_sorted_unit_parameters(plane):
    times = PointSampler(plane, seed=9).times(0, 10)
    assert times == sorted(times)
    assert all(0.0 <= t <= 1.0 for t in times)


def test_radius_must_be_positive(plane):
    with pytest.raises(MalformedInputError, match="radius must be positive"):
        PointSampler(plane, radius=0.0)


def test_charts_must_exist(plane):
    with pytest.raises(MalformedInputError, match="unknown chart P4"):
        PointSampler(plane, charts=["P4"])


def test_charts_must_not_be_empty(plane):
    with pytest.raises(MalformedInputError, match="at least one chart"):
        PointSampler(plane, charts=[])
