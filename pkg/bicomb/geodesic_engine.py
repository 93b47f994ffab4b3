import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import networkx as nx
import numpy as np
from scipy.optimize import minimize_scalar

from bicomb.atlas_manager import ChartAtlas, CrossingSides, apply_isometry
from bicomb.crossing_optimizer import CrossingProblem, solve_crossing, solve_lexicographic
from bicomb.custom_types import BicombingMethod, DictWithStringKeys, PExponent, Vector
from bicomb.exceptions import (
    CertificateError,
    MalformedInputError,
    NonConvergenceError,
    SearchExhaustedError,
)
from bicomb.lp_geometry import P_INF, lerp, lp_distance, lp_norm, p_label, parse_p
from bicomb.models import (
    EngineOptions,
    IsometrySpec,
    LocalGeodesicVerdict,
    PathSegment,
    PolyPath,
    SpacePoint,
)
from bicomb.utils import natural_key, rounded_key

logger = logging.getLogger(__name__)

REPORTED_P: tuple[PExponent, ...] = (1.0, 2.0, P_INF)
ZERO_SEGMENT = 1e-14
MIDPOINT_MAX_ITER = 200
CONTRACTION_SLACK = 1e-12


@dataclass(frozen=True)
class ChartRoute:
    charts: tuple[str, ...]
    gluings: tuple[int, ...]


@dataclass(frozen=True)
class RouteSolution:
    route: ChartRoute
    problem: CrossingProblem
    z: Vector
    value: float
    sides: tuple[CrossingSides, ...]
    start: Vector
    end: Vector


def _walks(
    graph: nx.Graph, source: str, target: str, max_len: int
) -> Iterator[list[str]]:
    """Chart walks without consecutive repeats, up to max_len charts."""
    stack = [[source]]
    while stack:
        walk = stack.pop()
        if walk[-1] == target:
            yield walk
        if len(walk) < max_len:
            for nxt in sorted(graph.neighbors(walk[-1]), key=natural_key, reverse=True):
                stack.append(walk + [nxt])


def enumerate_routes(
    atlas: ChartAtlas,
    start_charts: Sequence[str],
    end_charts: Sequence[str],
    opts: EngineOptions,
) -> list[ChartRoute]:
    """Chart sequences from the charts of x to the charts of y, expanded over parallel gluings."""
    simple = nx.Graph(atlas.graph)
    routes: dict[tuple, ChartRoute] = {}
    for source in start_charts:
        for target in end_charts:
            if opts.allow_chart_revisits:
                paths: Iterator[list[str]] = _walks(simple, source, target, opts.max_chart_seq_len)
            elif source == target:
                paths = iter([[source]])
            else:
                paths = nx.all_simple_paths(
                    simple, source, target, cutoff=opts.max_chart_seq_len - 1
                )
            for path in paths:
                choices = [
                    sorted(atlas.graph.get_edge_data(a, b).keys())
                    for a, b in zip(path, path[1:])
                ]
                for combo in _product(choices):
                    route = ChartRoute(tuple(path), tuple(combo))
                    routes[(route.charts, route.gluings)] = route
    return list(routes.values())


def _product(choices: list[list[int]]) -> Iterator[tuple[int, ...]]:
    if not choices:
        yield ()
        return
    for head in choices[0]:
        for tail in _product(choices[1:]):
            yield (head,) + tail


def build_problem(
    atlas: ChartAtlas, route: ChartRoute, start: Vector, end: Vector
) -> tuple[CrossingProblem, tuple[CrossingSides, ...]]:
    sides = tuple(
        atlas.crossing(index, chart) for index, chart in zip(route.gluings, route.charts)
    )
    widths = [s.dirs_from.shape[1] for s in sides]
    n = sum(widths)
    slices = np.cumsum([0] + widths)
    matrices, offsets = [], []
    if not sides:
        matrices.append(np.zeros((start.size, 0)))
        offsets.append(end - start)
    for i in range(len(sides) + 1):
        if not sides:
            break
        dim = atlas.dim(route.charts[i])
        m = np.zeros((dim, n))
        if i < len(sides):
            m[:, slices[i]:slices[i + 1]] += sides[i].dirs_from
            c = sides[i].base_from.copy()
        else:
            c = end.copy()
        if i > 0:
            m[:, slices[i - 1]:slices[i]] -= sides[i - 1].dirs_to
            c = c - sides[i - 1].base_to
        else:
            c = c - start
        matrices.append(m)
        offsets.append(c)
    lower = np.concatenate([s.lower for s in sides]) if sides else np.zeros(0)
    upper = np.concatenate([s.upper for s in sides]) if sides else np.zeros(0)
    return CrossingProblem(tuple(matrices), tuple(offsets), lower, upper), sides


def _flat_gap(base: Vector, dirs: Vector, lower: Vector, upper: Vector, v: Vector, p) -> float:
    """Distance from v to a bounded or unbounded flat of dimension at most one."""
    if dirs.shape[1] == 0:
        return lp_distance(base, v, p)
    if dirs.shape[1] > 1:
        return 0.0
    d = dirs[:, 0]
    t0 = float(np.clip(0.0, lower[0], upper[0]))
    r = lp_distance(base + d * t0, v, p)
    reach = 2.0 * r / lp_norm(d, p) + 1e-9
    lo, hi = max(lower[0], t0 - reach), min(upper[0], t0 + reach)
    if hi <= lo:
        return r
    result = minimize_scalar(
        lambda t: lp_distance(base + d * t, v, p), bounds=(lo, hi), method="bounded"
    )
    return min(r, float(result.fun))


def route_lower_bound(sides: Sequence[CrossingSides], start: Vector, end: Vector, p) -> float:
    if not sides:
        return lp_distance(start, end, p)
    first, last = sides[0], sides[-1]
    return _flat_gap(first.base_from, first.dirs_from, first.lower, first.upper, start, p) + (
        _flat_gap(last.base_to, last.dirs_to, last.lower, last.upper, end, p)
    )


def _ordered(atlas: ChartAtlas, x: SpacePoint, y: SpacePoint) -> tuple[SpacePoint, SpacePoint]:
    a, b = atlas.canonicalize(x), atlas.canonicalize(y)
    key_a = (natural_key(a.chart), rounded_key(a.coords))
    key_b = (natural_key(b.chart), rounded_key(b.coords))
    return (a, b) if key_a <= key_b else (b, a)


def search_routes(
    atlas: ChartAtlas, x: SpacePoint, y: SpacePoint, p: PExponent, opts: EngineOptions
) -> RouteSolution:
    """Branch and bound over chart routes; each route solves a convex crossing problem."""
    starts = {twin.chart: twin.vec for twin in atlas.equivalents(x)}
    ends = {twin.chart: twin.vec for twin in atlas.equivalents(y)}
    candidates = []
    for route in enumerate_routes(atlas, list(starts), list(ends), opts):
        start, end = starts[route.charts[0]], ends[route.charts[-1]]
        problem, sides = build_problem(atlas, route, start, end)
        bound = route_lower_bound(sides, start, end, p)
        candidates.append((bound, route, problem, sides, start, end))
    if not candidates:
        raise SearchExhaustedError(
            f"no chart sequence of length <= {opts.max_chart_seq_len} joins {x} and {y}"
        )
    candidates.sort(key=lambda c: (c[0], len(c[1].charts)))
    best: RouteSolution | None = None
    for bound, route, problem, sides, start, end in candidates:
        if best is not None and bound >= best.value - opts.tol:
            break
        solution = solve_crossing(problem, p)
        if best is None or solution.value < best.value - 1e-15:
            best = RouteSolution(route, problem, solution.z, solution.value, sides, start, end)
    logger.debug(f"Route search {x} -> {y} (p={p}) settled on {best.route.charts}")
    return best


def distance(
    space: ChartAtlas,
    x: SpacePoint,
    y: SpacePoint,
    p: PExponent,
    opts: EngineOptions | None = None,
) -> float:
    """Gluing-metric distance between two points."""
    opts = opts or EngineOptions()
    p = parse_p(p)
    a, b = _ordered(space, x, y)
    if space.same_point(a, b):
        return 0.0
    if space.convex_charts:
        shared = space.shared_chart(a, b)
        if shared is not None:
            return lp_distance(shared[1], shared[2], p)
    return search_routes(space, a, b, p, opts).value


def _segments_of(solution: RouteSolution, z: Vector) -> list[tuple[str, Vector, Vector]]:
    params = list(zip(solution.sides, _split(solution, z)))
    points_from = [s.base_from + s.dirs_from @ u for s, u in params]
    points_to = [s.base_to + s.dirs_to @ u for s, u in params]
    starts = [solution.start] + points_to
    ends = points_from + [solution.end]
    return list(zip(solution.route.charts, starts, ends))


def _split(solution: RouteSolution, z: Vector) -> list[Vector]:
    widths = [s.dirs_from.shape[1] for s in solution.sides]
    cuts = np.cumsum([0] + widths)
    return [z[cuts[i]:cuts[i + 1]] for i in range(len(widths))]


def assemble_path(
    atlas: ChartAtlas,
    x: SpacePoint,
    y: SpacePoint,
    pieces: Sequence[tuple[str, Vector, Vector]],
    p: PExponent,
    method: BicombingMethod,
) -> PolyPath:
    kept = [
        (chart, start, end)
        for chart, start, end in pieces
        if float(np.max(np.abs(end - start), initial=0.0))
        > ZERO_SEGMENT * (1.0 + float(np.max(np.abs(start), initial=0.0)))
    ]
    x = atlas.canonicalize(x)
    y = atlas.canonicalize(y)
    if not kept:
        return PolyPath(
            breakpoints=[x], chart_seq=[], segments=[], p=p, method=method,
            lengths={p_label(q): 0.0 for q in {*REPORTED_P, p}},
        )
    breakpoints = [x]
    for chart, _, end in kept[:-1]:
        breakpoints.append(atlas.canonicalize(atlas.point(chart, end)))
    breakpoints.append(y)
    segments = [
        PathSegment(
            chart=chart,
            start=tuple(float(c) + 0.0 for c in start),
            end=tuple(float(c) + 0.0 for c in end),
        )
        for chart, start, end in kept
    ]
    lengths = {
        p_label(q): sum(lp_distance(start, end, q) for _, start, end in kept)
        for q in {*REPORTED_P, p}
    }
    return PolyPath(
        breakpoints=breakpoints,
        chart_seq=[chart for chart, _, _ in kept],
        segments=segments,
        p=p,
        method=method,
        lengths=lengths,
    )


def path_length(path: PolyPath, p: PExponent) -> float:
    return sum(
        lp_distance(np.asarray(s.start), np.asarray(s.end), p) for s in path.segments
    )


def _pieces(atlas: ChartAtlas, x: SpacePoint, y: SpacePoint, p, opts, lexicographic: bool):
    a, b = atlas.canonicalize(x), atlas.canonicalize(y)
    if atlas.convex_charts:
        shared = atlas.shared_chart(a, b)
        if shared is not None:
            return [shared], lp_distance(shared[1], shared[2], p)
    solution = search_routes(atlas, a, b, p, opts)
    z = solve_lexicographic(solution.problem, p) if lexicographic else solution.z
    return _segments_of(solution, z), solution.value


def geodesic(
    space: ChartAtlas,
    x: SpacePoint,
    y: SpacePoint,
    p: PExponent,
    opts: EngineOptions | None = None,
    method: BicombingMethod = BicombingMethod.CAT0_TRAJECTORY,
) -> PolyPath:
    """Canonical bicombing trajectory from x to y, parametrized for d_p.

    The cat0-trajectory method returns the l^2 trajectory and certifies that its d_p length
    matches the d_p distance; direct-lp minimizes d_p directly with a deterministic tie-break.
    """
    opts = opts or EngineOptions()
    p = parse_p(p)
    if space.same_point(x, y):
        return assemble_path(space, x, y, [], p, method)
    if method == BicombingMethod.DIRECT_LP:
        pieces, _ = _pieces(space, x, y, p, opts, lexicographic=True)
        return assemble_path(space, x, y, pieces, p, method)
    if method != BicombingMethod.CAT0_TRAJECTORY:
        raise MalformedInputError(f"the engine computes {method.value} paths only via a handle")
    pieces, _ = _pieces(space, x, y, 2.0, opts, lexicographic=False)
    path = assemble_path(space, x, y, pieces, p, method)
    if p != 2.0:
        target = distance(space, x, y, p, opts)
        length = path.lengths[p_label(p)]
        if length > target + opts.certificate_tol * (1.0 + target):
            logger.error(f"Trajectory {x} -> {y} has d_p length {length:.12g} > {target:.12g}")
            raise CertificateError(
                f"the l2 trajectory from {x} to {y} has p={p_label(p)} length {length:.12g}, "
                f"exceeding the distance {target:.12g}"
            )
    return path


def point_at_arclength(atlas: ChartAtlas, path: PolyPath, s: float, p: PExponent) -> SpacePoint:
    if not path.segments or s <= 0:
        return path.breakpoints[0]
    travelled = 0.0
    for segment in path.segments:
        start, end = np.asarray(segment.start), np.asarray(segment.end)
        length = lp_distance(start, end, p)
        if s < travelled + length:
            fraction = (s - travelled) / length
            return atlas.canonicalize(atlas.point(segment.chart, lerp(start, end, fraction)))
        travelled += length
    return path.breakpoints[-1]


class BicombingHandle:
    """Evaluator (x, y, t) -> point along the canonical trajectory from x to y."""

    def __init__(
        self,
        atlas: ChartAtlas,
        p: PExponent,
        method: BicombingMethod = BicombingMethod.CAT0_TRAJECTORY,
        opts: EngineOptions | None = None,
    ):
        self.atlas = atlas
        self.p = parse_p(p)
        self.method = method
        self.opts = opts or EngineOptions()
        self._geodesic = lru_cache(maxsize=4096)(self._compute_geodesic)
        self._distance = lru_cache(maxsize=1 << 15)(self._compute_distance)

    def _compute_geodesic(self, x: SpacePoint, y: SpacePoint) -> PolyPath:
        return geodesic(self.atlas, x, y, self.p, self.opts, self.method)

    def _compute_distance(self, x: SpacePoint, y: SpacePoint) -> float:
        return distance(self.atlas, x, y, self.p, self.opts)

    def geodesic(self, x: SpacePoint, y: SpacePoint) -> PolyPath:
        return self._geodesic(self.atlas.canonicalize(x), self.atlas.canonicalize(y))

    def distance(self, x: SpacePoint, y: SpacePoint) -> float:
        return self._distance(*_ordered(self.atlas, x, y))

    def eval(self, x: SpacePoint, y: SpacePoint, t: float) -> SpacePoint:
        if not 0.0 <= t <= 1.0:
            raise MalformedInputError(f"bicombing parameter t={t} is outside [0, 1]")
        if t == 0.0:
            return self.atlas.canonicalize(x)
        if t == 1.0:
            return self.atlas.canonicalize(y)
        path = self.geodesic(x, y)
        return point_at_arclength(self.atlas, path, t * path.lengths[p_label(self.p)], self.p)

    def describe(self) -> DictWithStringKeys:
        return {"method": self.method.value, "p": p_label(self.p), "space": self.atlas.family}


def sigma_eval(handle: BicombingHandle, x: SpacePoint, y: SpacePoint, t: float) -> SpacePoint:
    return handle.eval(x, y, t)


def midpoint_trace(
    handle: BicombingHandle,
    x: SpacePoint,
    y: SpacePoint,
    tol: float | None = None,
    max_iter: int = MIDPOINT_MAX_ITER,
) -> tuple[SpacePoint, list[float]]:
    """Runs x' = s(x, y, 1/2), y' = s(y, x, 1/2) until the pair is closer than tol."""
    tol = handle.opts.tol if tol is None else tol
    a, b = handle.atlas.canonicalize(x), handle.atlas.canonicalize(y)
    gaps = [handle.distance(a, b)]
    for _ in range(max_iter):
        if gaps[-1] < tol:
            return a, gaps
        a, b = handle.eval(a, b, 0.5), handle.eval(b, a, 0.5)
        gaps.append(handle.distance(a, b))
        if gaps[-1] > gaps[-2] + CONTRACTION_SLACK:
            logger.warning(
                f"Midpoint iteration for {x}, {y} expanded from {gaps[-2]:.3g} to {gaps[-1]:.3g}"
            )
    if gaps[-1] < tol:
        return a, gaps
    raise NonConvergenceError(
        f"midpoint iteration for {x}, {y} still at gap {gaps[-1]:.3g} after {max_iter} steps"
    )


def midpoint(
    handle: BicombingHandle, x: SpacePoint, y: SpacePoint, tol: float | None = None
) -> SpacePoint:
    return midpoint_trace(handle, x, y, tol)[0]


class ReversibilizedHandle(BicombingHandle):
    """s^R(x, y, t) = m(s(x, y, t), s(y, x, 1 - t))."""

    def __init__(self, base: BicombingHandle, tol: float | None = None):
        super().__init__(base.atlas, base.p, BicombingMethod.MIDPOINT_REVERSIBILIZED, base.opts)
        self.base = base
        self.tol = tol
        self._geodesic = base._geodesic
        self._distance = base._distance

    def eval(self, x: SpacePoint, y: SpacePoint, t: float) -> SpacePoint:
        if not 0.0 <= t <= 1.0:
            raise MalformedInputError(f"bicombing parameter t={t} is outside [0, 1]")
        forward = self.base.eval(x, y, t)
        backward = self.base.eval(y, x, 1.0 - t)
        return midpoint(self.base, forward, backward, self.tol)

    def describe(self) -> DictWithStringKeys:
        return {**super().describe(), "base": self.base.describe()}


def reversibilize(handle: BicombingHandle, tol: float | None = None) -> BicombingHandle:
    return ReversibilizedHandle(handle, tol)


def involution_fixed_point(
    handle: BicombingHandle, isometry: IsometrySpec, x: SpacePoint, tol: float | None = None
) -> SpacePoint:
    """m(x, gx), fixed by an involution g when the handle is reversible and g-equivariant."""
    return midpoint(handle, x, apply_isometry(handle.atlas, isometry, x), tol)


def local_geodesic_check(
    space: ChartAtlas,
    path: PolyPath,
    p: PExponent,
    eps: float,
    opts: EngineOptions | None = None,
    windows: int = 64,
) -> LocalGeodesicVerdict:
    """Compares short subpaths of length eps with the distance between their ends."""
    opts = opts or EngineOptions()
    p = parse_p(p)
    total = path_length(path, p)
    if eps <= 0:
        raise MalformedInputError("eps must be positive")
    if not path.segments:
        return LocalGeodesicVerdict(ok=True, worst_excess=0.0)
    spacing = min(lp_distance(np.asarray(s.start), np.asarray(s.end), p) for s in path.segments)
    if len(path.segments) > 1 and eps >= spacing / 2:
        raise MalformedInputError(
            f"eps={eps} must be below half the shortest segment ({spacing:.6g})"
        )
    eps = min(eps, total)
    starts = set(np.linspace(0.0, total - eps, windows).tolist())
    travelled = 0.0
    for segment in path.segments[:-1]:
        travelled += lp_distance(np.asarray(segment.start), np.asarray(segment.end), p)
        starts.add(min(max(travelled - eps / 2, 0.0), total - eps))
    worst, witness = 0.0, None
    for s in sorted(starts):
        a = point_at_arclength(space, path, s, p)
        b = point_at_arclength(space, path, s + eps, p)
        gap = distance(space, a, b, p, opts)
        excess = eps - gap
        if excess > worst:
            worst = excess
            witness = {"s": s, "t": s + eps, "length": eps, "distance": gap}
    return LocalGeodesicVerdict(
        ok=worst <= max(opts.tol, opts.certificate_tol) * (1.0 + eps),
        worst_excess=worst,
        witness=witness,
    )


def _point_segment_gap(point: Vector, start: Vector, end: Vector, p: PExponent) -> float:
    if np.allclose(start, end, rtol=0.0, atol=ZERO_SEGMENT):
        return lp_distance(point, start, p)
    result = minimize_scalar(
        lambda t: lp_distance(lerp(start, end, t), point, p),
        bounds=(0.0, 1.0),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return min(float(result.fun), lp_distance(point, start, p), lp_distance(point, end, p))


def gap_to_path(
    atlas: ChartAtlas, point: SpacePoint, path: PolyPath, p: PExponent, opts: EngineOptions
) -> float:
    """Distance from a point to the image of a path."""
    located = {twin.chart: twin.vec for twin in atlas.equivalents(point)}
    best = math.inf
    for segment in path.segments:
        if segment.chart in located:
            best = min(
                best,
                _point_segment_gap(
                    located[segment.chart], np.asarray(segment.start), np.asarray(segment.end), p
                ),
            )
    if math.isinf(best):
        best = min(distance(atlas, point, b, p, opts) for b in path.breakpoints)
    return best


def trajectory_samples(
    atlas: ChartAtlas, path: PolyPath, per_segment: int = 32
) -> list[SpacePoint]:
    points = list(path.breakpoints)
    for segment in path.segments:
        start, end = np.asarray(segment.start), np.asarray(segment.end)
        for t in np.linspace(0.0, 1.0, per_segment)[1:-1]:
            points.append(atlas.point(segment.chart, lerp(start, end, float(t))))
    return points


def trajectory_hausdorff(
    atlas: ChartAtlas,
    first: PolyPath,
    second: PolyPath,
    p: PExponent,
    opts: EngineOptions | None = None,
    per_segment: int = 32,
) -> float:
    """Sampled Hausdorff distance between the images of two paths."""
    opts = opts or EngineOptions()
    forward = max(
        gap_to_path(atlas, q, second, p, opts)
        for q in trajectory_samples(atlas, first, per_segment)
    )
    backward = max(
        gap_to_path(atlas, q, first, p, opts)
        for q in trajectory_samples(atlas, second, per_segment)
    )
    return max(forward, backward)
