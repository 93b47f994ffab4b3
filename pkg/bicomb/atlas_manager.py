import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from bicomb.custom_types import ChartKind, PExponent, Vector
from bicomb.exceptions import InvalidGluingError, MalformedInputError
from bicomb.lp_geometry import P_INF, as_coord_vec, lp_distance, lp_norm, parse_p
from bicomb.models import (
    Bound,
    Chart,
    GluingFlat,
    GluingIdentification,
    IsometrySpec,
    SpacePoint,
    SpaceSummary,
)
from bicomb.utils import natural_key, rounded_key

logger = logging.getLogger(__name__)

MEMBERSHIP_TOL = 1e-12
STANDARD_P: tuple[PExponent, ...] = (1.0, 2.0, P_INF)


@dataclass(frozen=True)
class FlatGeometry:
    base_a: Vector
    dirs_a: Vector  # (dim_a, k), directions as columns
    base_b: Vector
    dirs_b: Vector  # orientation folded in
    lower: Vector
    upper: Vector

    @property
    def k(self) -> int:
        return self.dirs_a.shape[1]


@dataclass(frozen=True)
class CrossingSides:
    """One gluing seen from the chart a path leaves towards the chart it enters."""

    index: int
    base_from: Vector
    dirs_from: Vector
    base_to: Vector
    dirs_to: Vector
    lower: Vector
    upper: Vector


def _bounds_array(bounds: Sequence[Bound] | None, dim: int) -> tuple[Vector, Vector]:
    lower = np.full(dim, -np.inf)
    upper = np.full(dim, np.inf)
    if bounds is not None:
        for j, (lo, hi) in enumerate(bounds):
            if lo is not None:
                lower[j] = lo
            if hi is not None:
                upper[j] = hi
    return lower, upper


def _clean(vec: Iterable[float]) -> tuple[float, ...]:
    return tuple(float(c) + 0.0 for c in vec)


def _point_sort_key(point: SpacePoint) -> tuple:
    return (natural_key(point.chart), rounded_key(point.coords))


class ChartAtlas:
    """A space assembled from flat charts glued along affine flats."""

    def __init__(
        self,
        charts: Sequence[Chart],
        gluings: Sequence[GluingIdentification],
        declared_p: Iterable[PExponent] = STANDARD_P,
        family: str | None = None,
        convex_charts: bool = False,
    ):
        self.family = family
        self.convex_charts = convex_charts
        self.declared_p: tuple[PExponent, ...] = tuple(
            sorted({parse_p(p) for p in declared_p}, key=lambda p: float(p))
        )
        self.charts: dict[str, Chart] = {}
        for chart in sorted(charts, key=lambda c: natural_key(c.id)):
            if chart.id in self.charts:
                raise MalformedInputError(f"chart id {chart.id} is declared twice")
            self.charts[chart.id] = chart
        if not self.charts:
            raise MalformedInputError("a space needs at least one chart")
        self._chart_bounds = {
            chart.id: _bounds_array(chart.bounds, chart.dim) for chart in self.charts.values()
        }
        self.gluings: list[GluingIdentification] = list(gluings)
        self.flats: list[FlatGeometry] = [
            self._validate_gluing(g) for g in self.gluings
        ]
        self.graph = nx.MultiGraph()
        self.graph.add_nodes_from(self.charts)
        for index, gluing in enumerate(self.gluings):
            self.graph.add_edge(gluing.chart_a, gluing.chart_b, key=index)
        self.product_index: dict[str, tuple[str, str]] = {}
        self.factors: tuple["ChartAtlas", "ChartAtlas"] | None = None
        self.product_p: PExponent | None = None
        self._equivalents = lru_cache(maxsize=1 << 16)(self._compute_equivalents)
        logger.debug(
            f"Built atlas {family or 'custom'} with {len(self.charts)} charts "
            f"and {len(self.gluings)} gluings"
        )

    def _validate_gluing(self, gluing: GluingIdentification) -> FlatGeometry:
        label = gluing.label
        for chart_id in (gluing.chart_a, gluing.chart_b):
            if chart_id not in self.charts:
                raise InvalidGluingError(f"gluing {label} references unknown chart {chart_id}")
        if gluing.chart_a == gluing.chart_b:
            raise InvalidGluingError(f"gluing {label} identifies a chart with itself")
        sides = []
        for chart_id, flat in ((gluing.chart_a, gluing.flat_a), (gluing.chart_b, gluing.flat_b)):
            dim = self.charts[chart_id].dim
            try:
                base = as_coord_vec(flat.basepoint, dim)
                dirs = np.array(
                    [as_coord_vec(d, dim) for d in flat.directions], dtype=float
                ).reshape(len(flat.directions), dim).T
            except MalformedInputError as e:
                raise InvalidGluingError(f"gluing {label}: {e}") from e
            sides.append((chart_id, base, dirs))
        (_, base_a, dirs_a), (_, base_b, dirs_b) = sides
        k = dirs_a.shape[1]
        if dirs_b.shape[1] != k:
            raise InvalidGluingError(f"gluing {label} glues flats of different dimension")
        for chart_id, _, dirs in sides:
            if k and np.linalg.matrix_rank(dirs) < k:
                raise InvalidGluingError(
                    f"gluing {label} has degenerate directions in chart {chart_id}"
                )
        dirs_b = dirs_b * gluing.orientation
        if gluing.param_bounds is not None and len(gluing.param_bounds) != k:
            raise InvalidGluingError(f"gluing {label} needs {k} parameter bounds")
        lower, upper = _bounds_array(gluing.param_bounds, k)
        rng = np.random.default_rng(0)
        for p in self.declared_p:
            for delta in rng.normal(size=(16, k)) if k else []:
                len_a = lp_norm(dirs_a @ delta, p)
                len_b = lp_norm(dirs_b @ delta, p)
                if abs(len_a - len_b) > 1e-12 * (1.0 + len_a):
                    raise InvalidGluingError(
                        f"gluing {label} is not isometric for p={p}: "
                        f"{len_a:.12g} vs {len_b:.12g}"
                    )
        for chart_id, base, dirs in (
            (gluing.chart_a, base_a, dirs_a),
            (gluing.chart_b, base_b, dirs_b),
        ):
            self._check_flat_inside(label, chart_id, base, dirs, lower, upper)
        return FlatGeometry(base_a, dirs_a, base_b, dirs_b, lower, upper)

    def _check_flat_inside(
        self, label: str, chart_id: str, base: Vector, dirs: Vector, lower: Vector, upper: Vector
    ) -> None:
        c_lo, c_hi = self._chart_bounds[chart_id]
        bounded_coords = np.isfinite(c_lo) | np.isfinite(c_hi)
        for i in range(dirs.shape[1]):
            moves = np.abs(dirs[:, i]) > 0
            finite = np.isfinite(lower[i]) and np.isfinite(upper[i])
            if np.any(moves & bounded_coords) and not finite:
                raise InvalidGluingError(
                    f"gluing {label} leaves the bounded chart {chart_id} along direction {i}"
                )
        params = [
            (lower[i], upper[i]) if np.isfinite(lower[i]) and np.isfinite(upper[i]) else (0.0,)
            for i in range(dirs.shape[1])
        ]
        for corner in itertools.product(*params):
            point = base + dirs @ np.asarray(corner, dtype=float)
            if not self.in_bounds(chart_id, point, tol=1e-9):
                raise InvalidGluingError(
                    f"gluing {label} reaches {point.tolist()} outside chart {chart_id}"
                )

    def chart(self, chart_id: str) -> Chart:
        try:
            return self.charts[chart_id]
        except KeyError as e:
            raise MalformedInputError(f"unknown chart {chart_id}") from e

    def dim(self, chart_id: str) -> int:
        return self.chart(chart_id).dim

    def chart_bounds(self, chart_id: str) -> tuple[Vector, Vector]:
        self.chart(chart_id)
        return self._chart_bounds[chart_id]

    @property
    def bounded(self) -> bool:
        return all(
            np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))
            for lo, hi in self._chart_bounds.values()
        )

    def in_bounds(self, chart_id: str, vec: Vector, tol: float = MEMBERSHIP_TOL) -> bool:
        lo, hi = self._chart_bounds[chart_id]
        if vec.shape != lo.shape:
            return False
        return bool(np.all(vec >= lo - tol) and np.all(vec <= hi + tol))

    def point(self, chart_id: str, coords: Iterable[float]) -> SpacePoint:
        """Builds a SpacePoint after checking it lies inside its chart."""
        vec = as_coord_vec(coords, self.dim(chart_id))
        if not self.in_bounds(chart_id, vec):
            raise MalformedInputError(f"point {vec.tolist()} lies outside chart {chart_id}")
        lo, hi = self._chart_bounds[chart_id]
        return SpacePoint(chart=chart_id, coords=_clean(np.clip(vec, lo, hi)))

    def incident(self, chart_id: str) -> list[int]:
        return sorted(key for _, _, key in self.graph.edges(chart_id, keys=True))

    def crossing(self, index: int, from_chart: str) -> CrossingSides:
        gluing = self.gluings[index]
        flat = self.flats[index]
        if from_chart == gluing.chart_a:
            return CrossingSides(
                index, flat.base_a, flat.dirs_a, flat.base_b, flat.dirs_b, flat.lower, flat.upper
            )
        if from_chart == gluing.chart_b:
            return CrossingSides(
                index, flat.base_b, flat.dirs_b, flat.base_a, flat.dirs_a, flat.lower, flat.upper
            )
        raise MalformedInputError(f"gluing {gluing.label} does not touch chart {from_chart}")

    def flat_parameter(self, sides: CrossingSides, vec: Vector) -> Vector | None:
        """Parameter u with base_from + dirs_from u = vec, or None if vec is off the flat."""
        offset = vec - sides.base_from
        scale = 1.0 + float(np.max(np.abs(vec))) if vec.size else 1.0
        if sides.dirs_from.shape[1] == 0:
            return np.zeros(0) if np.max(np.abs(offset)) <= MEMBERSHIP_TOL * scale else None
        u, *_ = np.linalg.lstsq(sides.dirs_from, offset, rcond=None)
        if np.max(np.abs(sides.dirs_from @ u - offset)) > MEMBERSHIP_TOL * scale:
            return None
        if np.any(u < sides.lower - MEMBERSHIP_TOL * scale) or np.any(
            u > sides.upper + MEMBERSHIP_TOL * scale
        ):
            return None
        return np.clip(u, sides.lower, sides.upper)

    def _compute_equivalents(self, x: SpacePoint) -> tuple[SpacePoint, ...]:
        start = self.point(x.chart, x.coords)
        seen = {(start.chart, rounded_key(start.coords))}
        found = [start]
        queue = [start]
        while queue:
            current = queue.pop()
            vec = current.vec
            for index in self.incident(current.chart):
                sides = self.crossing(index, current.chart)
                u = self.flat_parameter(sides, vec)
                if u is None:
                    continue
                gluing = self.gluings[index]
                target = gluing.chart_b if current.chart == gluing.chart_a else gluing.chart_a
                image = sides.base_to + sides.dirs_to @ u
                lo, hi = self._chart_bounds[target]
                twin = SpacePoint(chart=target, coords=_clean(np.clip(image, lo, hi)))
                key = (twin.chart, rounded_key(twin.coords))
                if key not in seen:
                    seen.add(key)
                    found.append(twin)
                    queue.append(twin)
        return tuple(sorted(found, key=_point_sort_key))

    def equivalents(self, x: SpacePoint) -> list[SpacePoint]:
        """All (chart, coords) pairs identified with x by the gluings."""
        return list(self._equivalents(x))

    def canonicalize(self, x: SpacePoint) -> SpacePoint:
        return self._equivalents(x)[0]

    def charts_containing(self, x: SpacePoint) -> list[str]:
        return list(dict.fromkeys(e.chart for e in self._equivalents(x)))

    def locate(self, x: SpacePoint, chart_id: str) -> Vector | None:
        for twin in self._equivalents(x):
            if twin.chart == chart_id:
                return twin.vec
        return None

    def same_point(self, x: SpacePoint, y: SpacePoint, tol: float = MEMBERSHIP_TOL) -> bool:
        a = self.canonicalize(x)
        b = self.canonicalize(y)
        return a.chart == b.chart and float(np.max(np.abs(a.vec - b.vec))) <= tol

    def shared_chart(self, x: SpacePoint, y: SpacePoint) -> tuple[str, Vector, Vector] | None:
        """The least chart holding both points, with their coordinates there."""
        located = {twin.chart: twin.vec for twin in self._equivalents(y)}
        for twin in self._equivalents(x):
            if twin.chart in located:
                return twin.chart, twin.vec, located[twin.chart]
        return None

    def set_product(
        self,
        factors: tuple["ChartAtlas", "ChartAtlas"],
        index: dict[str, tuple[str, str]],
        p: PExponent,
    ) -> None:
        self.factors = factors
        self.product_index = index
        self.product_p = p

    def __repr__(self) -> str:
        return f"ChartAtlas({self.family or 'custom'}, charts={len(self.charts)})"


def gluing_path_length(
    atlas: ChartAtlas, pts: Sequence[SpacePoint], chart_seq: Sequence[str], p: PExponent
) -> float:
    """Length of a gluing path: the sum of chart distances between consecutive points."""
    if len(pts) != len(chart_seq) + 1:
        raise MalformedInputError("a gluing path needs one chart per consecutive pair of points")
    total = 0.0
    for j, chart_id in enumerate(chart_seq):
        a = atlas.locate(pts[j], chart_id)
        b = atlas.locate(pts[j + 1], chart_id)
        if a is None or b is None:
            raise MalformedInputError(
                f"points {pts[j]} and {pts[j + 1]} are not both in chart {chart_id}"
            )
        total += lp_distance(a, b, p)
    return total


def describe_space(atlas: ChartAtlas) -> SpaceSummary:
    degrees = [deg for _, deg in atlas.graph.degree()]
    return SpaceSummary(
        family=atlas.family,
        charts=len(atlas.charts),
        gluings=len(atlas.gluings),
        dims=sorted({chart.dim for chart in atlas.charts.values()}),
        max_degree=max(degrees, default=0),
        declared_p=list(atlas.declared_p),
        bounded=atlas.bounded,
    )


def plane(chart_id: str) -> Chart:
    return Chart(id=chart_id, dim=2, kind=ChartKind.PLANE)


def line_gluing(
    chart_a: str,
    chart_b: str,
    base_a: Sequence[float],
    base_b: Sequence[float],
    direction: Sequence[float],
    gluing_id: str | None = None,
) -> GluingIdentification:
    return GluingIdentification(
        chart_a=chart_a,
        chart_b=chart_b,
        flat_a=GluingFlat(basepoint=list(base_a), directions=[list(direction)]),
        flat_b=GluingFlat(basepoint=list(base_b), directions=[list(direction)]),
        id=gluing_id,
    )


X_AXIS = (1.0, 0.0)
Y_AXIS = (0.0, 1.0)
DIAGONAL = (1.0, 1.0)
ORIGIN = (0.0, 0.0)


def build_lsp(index: int) -> ChartAtlas:
    """The five model spaces: up to three planes glued along axes or the diagonal."""
    layouts: dict[int, list[tuple[str, str, tuple[float, float]]]] = {
        1: [],
        2: [("P1", "P2", X_AXIS)],
        3: [("P1", "P2", DIAGONAL)],
        4: [("P1", "P2", X_AXIS), ("P2", "P3", Y_AXIS)],
        5: [("P1", "P2", X_AXIS), ("P2", "P3", DIAGONAL)],
    }
    if index not in layouts:
        raise MalformedInputError(f"there is no lsp{index} space")
    layout = layouts[index]
    chart_ids = sorted({"P1"} | {c for a, b, _ in layout for c in (a, b)}, key=natural_key)
    gluings = [line_gluing(a, b, ORIGIN, ORIGIN, direction) for a, b, direction in layout]
    return ChartAtlas(
        [plane(c) for c in chart_ids], gluings, family=f"lsp{index}", convex_charts=True
    )


def _ck_line(family: str, offset: int) -> tuple[tuple[float, float], tuple[float, float]]:
    if family == "h":
        return (0.0, float(offset)), X_AXIS
    if family == "v":
        return (float(offset), 0.0), Y_AXIS
    return (0.0, float(offset)), DIAGONAL


def build_ck_patch(angle: int, depth: int, offsets: Sequence[int] = (-1, 0, 1)) -> ChartAtlas:
    """Breadth-first patch of planes glued along horizontal and vertical or diagonal lines.

    Planes alternate between a middle type carrying two line families and a side type
    carrying the single family it was attached by; a plane's line 0 of that family is
    glued to the parent's line.
    """
    if angle not in (45, 90):
        raise MalformedInputError(f"ck_patch angle must be 45 or 90, got {angle}")
    if depth < 0:
        raise MalformedInputError(f"ck_patch depth must be non-negative, got {depth}")
    offsets = sorted(set(int(k) for k in offsets))
    if 0 not in offsets:
        raise MalformedInputError("ck_patch offsets must include 0")
    second = "v" if angle == 90 else "d"
    charts = [plane("P1")]
    gluings: list[GluingIdentification] = []
    # (chart id, families carried, line used by the parent, depth)
    frontier: list[tuple[str, tuple[str, ...], tuple[str, int] | None, int]] = [
        ("P1", ("h", second), None, 0)
    ]
    counter = 1
    while frontier:
        chart_id, families, parent_line, level = frontier.pop(0)
        if level >= depth:
            continue
        for family in families:
            for offset in offsets:
                if parent_line == (family, offset):
                    continue
                counter += 1
                child = f"P{counter}"
                base, direction = _ck_line(family, offset)
                child_base, _ = _ck_line(family, 0)
                charts.append(plane(child))
                gluings.append(
                    line_gluing(
                        chart_id, child, base, child_base, direction, f"{chart_id}:{family}{offset}"
                    )
                )
                child_families = (family,) if len(families) == 2 else ("h", second)
                frontier.append((child, child_families, (family, 0), level + 1))
    logger.info(f"Built ck_patch({angle}, {depth}) with {len(charts)} planes")
    return ChartAtlas(charts, gluings, family=f"ck_patch({angle},{depth})", convex_charts=True)


def _lift_flat(flat: GluingFlat, dirs_sign: float, other_dim: int, before: bool) -> GluingFlat:
    """Extends a factor flat by the full coordinate frame of the other factor."""
    own_dim = len(flat.basepoint)
    zeros_other = [0.0] * other_dim
    zeros_own = [0.0] * own_dim
    if before:
        base = list(flat.basepoint) + zeros_other
        own = [list(np.multiply(d, dirs_sign)) + zeros_other for d in flat.directions]
        extra = [zeros_own + row for row in np.eye(other_dim).tolist()]
    else:
        base = zeros_other + list(flat.basepoint)
        own = [zeros_other + list(np.multiply(d, dirs_sign)) for d in flat.directions]
        extra = [row + zeros_own for row in np.eye(other_dim).tolist()]
    return GluingFlat(basepoint=base, directions=own + extra)


def _chart_bound_list(chart: Chart) -> list[Bound]:
    return [list(pair) for pair in chart.bounds] if chart.bounds else [[None, None]] * chart.dim


def lp_product(first: ChartAtlas, second: ChartAtlas, p: PExponent) -> ChartAtlas:
    """The l^p product: pairwise product charts, factor gluings lifted by the identity."""
    p = parse_p(p)
    charts = []
    index: dict[str, tuple[str, str]] = {}
    for a, b in itertools.product(first.charts.values(), second.charts.values()):
        chart_id = f"{a.id}x{b.id}"
        bounds = _chart_bound_list(a) + _chart_bound_list(b)
        finite = all(lo is not None and hi is not None for lo, hi in bounds)
        charts.append(
            Chart(
                id=chart_id,
                dim=a.dim + b.dim,
                kind=ChartKind.BOX if finite else ChartKind.PRODUCT,
                bounds=bounds,
            )
        )
        index[chart_id] = (a.id, b.id)
    gluings = []
    for g in first.gluings:
        k = len(g.flat_a.directions)
        for b in second.charts.values():
            gluings.append(
                GluingIdentification(
                    chart_a=f"{g.chart_a}x{b.id}",
                    chart_b=f"{g.chart_b}x{b.id}",
                    flat_a=_lift_flat(g.flat_a, 1.0, b.dim, before=True),
                    flat_b=_lift_flat(g.flat_b, float(g.orientation), b.dim, before=True),
                    param_bounds=(g.param_bounds or [[None, None]] * k) + _chart_bound_list(b),
                    id=f"{g.label}x{b.id}",
                )
            )
    for g in second.gluings:
        k = len(g.flat_a.directions)
        for a in first.charts.values():
            gluings.append(
                GluingIdentification(
                    chart_a=f"{a.id}x{g.chart_a}",
                    chart_b=f"{a.id}x{g.chart_b}",
                    flat_a=_lift_flat(g.flat_a, 1.0, a.dim, before=False),
                    flat_b=_lift_flat(g.flat_b, float(g.orientation), a.dim, before=False),
                    param_bounds=(g.param_bounds or [[None, None]] * k) + _chart_bound_list(a),
                    id=f"{a.id}x{g.label}",
                )
            )
    declared = {p} | (set(first.declared_p) & set(second.declared_p))
    atlas = ChartAtlas(
        charts,
        gluings,
        declared_p=declared,
        family=f"({first.family})x({second.family})",
        convex_charts=first.convex_charts and second.convex_charts,
    )
    atlas.set_product((first, second), index, p)
    return atlas


def product_point(atlas: ChartAtlas, a: SpacePoint, b: SpacePoint) -> SpacePoint:
    if atlas.factors is None:
        raise MalformedInputError("product points need a product atlas")
    return atlas.point(f"{a.chart}x{b.chart}", a.coords + b.coords)


def split_product_point(atlas: ChartAtlas, x: SpacePoint) -> tuple[SpacePoint, SpacePoint]:
    if atlas.factors is None or x.chart not in atlas.product_index:
        raise MalformedInputError(f"{x} is not a point of a product atlas")
    chart_a, chart_b = atlas.product_index[x.chart]
    split = atlas.factors[0].dim(chart_a)
    return (
        atlas.factors[0].point(chart_a, x.coords[:split]),
        atlas.factors[1].point(chart_b, x.coords[split:]),
    )


def apply_isometry(atlas: ChartAtlas, isometry: IsometrySpec, x: SpacePoint) -> SpacePoint:
    """Image of x under the first chart map whose source chart holds x."""
    for twin in atlas.equivalents(x):
        for chart_map in isometry.maps:
            if chart_map.source == twin.chart:
                image = np.asarray(chart_map.matrix, dtype=float) @ twin.vec + np.asarray(
                    chart_map.offset, dtype=float
                )
                return atlas.canonicalize(atlas.point(chart_map.target, image))
    raise MalformedInputError(f"isometry {isometry.name or 'unnamed'} does not cover {x}")
