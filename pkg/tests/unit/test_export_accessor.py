import json
import math

import numpy as np
import pytest

from bicomb.boundary_manager import TruncatedRay
from bicomb.custom_types import BicombingMethod
from bicomb.exceptions import ExportError
from bicomb.export_accessor import (
    dump_json,
    export_json,
    export_path_csv,
    export_ray_csv,
    fmt,
    path_csv,
    path_json,
    ray_csv,
)
from bicomb.geodesic_engine import assemble_path
from bicomb.models import BoundaryMetricValue


@pytest.fixture
def crossing_path(axis_pair):
    x, y = axis_pair.point("P1", (0, 1)), axis_pair.point("P2", (2, 1))
    pieces = [
        ("P1", np.array([0.0, 1.0]), np.array([1.0, 0.0])),
        ("P2", np.array([1.0, 0.0]), np.array([2.0, 1.0])),
    ]
    return assemble_path(axis_pair, x, y, pieces, 2.0, BicombingMethod.DIRECT_LP)


def test_fmt():
    assert fmt(0.1) == "0.1"
    assert fmt(-0.0) == "0"
    assert fmt(1 / 3) == "0.333333333333"


def test_path_csv(crossing_path):
    assert path_csv(crossing_path).splitlines() == [
        "chart,x0,x1,arclength",
        "P1,0,1,0",
        "P2,1,0,1.41421356237",
        "P2,2,1,2.82842712475",
    ]


def test_path_json(crossing_path):
    payload = json.loads(path_json(crossing_path))
    assert payload["p"] == "2"
    assert payload["method"] == "direct-lp"
    assert payload["length"] == "2.82842712475"
    assert [row["chart"] for row in payload["rows"]] == ["P1", "P2", "P2"]


def test_export_writes_the_file(tmp_path, crossing_path):
    destination = tmp_path / "runs" / "path.csv"
    assert export_path_csv(crossing_path, destination) == destination
    assert destination.read_text().startswith("chart,x0,x1,arclength\n")
    assert [p.name for p in destination.parent.iterdir()] == ["path.csv"]


def test_export_into_a_file_fails(tmp_path, crossing_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    with pytest.raises(ExportError, match="cannot write"):
        export_path_csv(crossing_path, blocker / "path.csv")


def test_dump_json_uses_aliases(tmp_path):
    value = BoundaryMetricValue(value=0.5, truncation_bound=0.25)
    assert json.loads(dump_json(value)) == {"truncationBound": 0.25, "value": 0.5}
    assert json.loads(dump_json([value, {"a": 1}]))[1] == {"a": 1}
    destination = export_json({"b": 2, "a": 1}, tmp_path / "out.json")
    assert destination.read_text() == '{\n  "a": 1,\n  "b": 2\n}\n'


def test_export_ray_csv(tmp_path, plane, plane_handle):
    ray = TruncatedRay.from_point(
        plane_handle, plane.point("P1", (0, 0)), plane.point("P1", (3, 4))
    )
    destination = export_ray_csv(ray, tmp_path / "ray.csv", samples=3)
    lines = destination.read_text().splitlines()
    assert lines[0] == "chart,x0,x1,arclength"
    assert lines[1] == "P1,0,0,0"
    chart, x0, x1, t = lines[2].split(",")
    assert (float(t), chart) == (2.5, "P1")
    assert math.isclose(float(x0), 1.5) and math.isclose(float(x1), 2.0)


def test_ray_and_path_exports_share_columns(crossing_path, plane):
    points = [plane.point("P1", (0, 0)), plane.point("P1", (1, 0))]
    ray_header = ray_csv([0.0, 1.0], points).splitlines()[0]
    assert ray_header == path_csv(crossing_path).splitlines()[0]
