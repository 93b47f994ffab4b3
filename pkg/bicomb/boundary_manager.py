"""Truncated rays and the boundary metrics built from them.

Rays are proxied by handle geodesics from a basepoint to a far anchor. A ray built from a point
stops once it reaches the point, so its horizon is infinite while its reach is the distance.
"""

import itertools
import logging
import math
from typing import Protocol, Sequence

import numpy as np

from bicomb.atlas_manager import ChartAtlas, lp_product, product_point
from bicomb.custom_types import AsymptoticVerdict, PExponent, Vector
from bicomb.cube_complex_manager import CESARO_GROWTH, cesaro_block_sequence, halfplane_complex
from bicomb.exceptions import (
    CertificateError,
    HorizonError,
    MalformedInputError,
    NormConstraintError,
    NotSeparatedError,
)
from bicomb.geodesic_engine import (
    BicombingHandle,
    distance,
    gap_to_path,
    path_length,
    point_at_arclength,
)
from bicomb.lp_geometry import P_INF, as_coord_vec, lp_norm, p_label, parse_p
from bicomb.models import (
    BoundaryMetricValue,
    CoverageReport,
    EngineOptions,
    GapEvent,
    HalfplaneProbeReport,
    PolyPath,
    QuasisymmetryReport,
    SpacePoint,
)
from bicomb.sampler import PointSampler
from bicomb.utils import run_concurrently

logger = logging.getLogger(__name__)

DEFAULT_HORIZON = 100.0
BISECTION_ITERS = 200
BISECTION_TOL = 1e-12
MONOTONE_SLACK = 1e-12
DIVERGENCE_TOL = 1e-7
NORM_TOL = 1e-12
HORIZON_SLACK = 1e-9
COVERAGE_SHARE = 0.75


class Ray(Protocol):
    space: ChartAtlas
    p: PExponent
    base: SpacePoint
    horizon: float

    @property
    def reach(self) -> float: ...

    def eval(self, t: float) -> SpacePoint: ...

    def metric(self, a: SpacePoint, b: SpacePoint) -> float: ...


class TruncatedRay:
    """rho(t) along the handle geodesic from base to target, stopping at the target."""

    def __init__(
        self,
        handle: BicombingHandle,
        base: SpacePoint,
        target: SpacePoint,
        horizon: float | None = None,
        path: PolyPath | None = None,
    ):
        self.handle = handle
        self.space = handle.atlas
        self.p = handle.p
        self.base = self.space.canonicalize(base)
        self.target = self.space.canonicalize(target)
        self.path = path if path is not None else handle.geodesic(self.base, self.target)
        self.length = path_length(self.path, self.p)
        self.horizon = math.inf if horizon is None else float(horizon)
        if self.horizon <= 0:
            raise MalformedInputError("ray horizons must be positive")
        if self.horizon > self.length * (1.0 + HORIZON_SLACK) + HORIZON_SLACK:
            raise HorizonError(
                f"horizon {self.horizon:g} exceeds the anchor distance {self.length:.12g}"
            )

    @classmethod
    def from_point(cls, handle: BicombingHandle, o: SpacePoint, x: SpacePoint) -> "TruncatedRay":
        return cls(handle, o, x)

    @classmethod
    def from_direction(
        cls,
        handle: BicombingHandle,
        o: SpacePoint,
        direction: Sequence[float] | Vector,
        horizon: float = DEFAULT_HORIZON,
    ) -> "TruncatedRay":
        """Ray from o along a chart direction, anchored at d_p distance horizon."""
        unit = as_coord_vec(direction, handle.atlas.dim(o.chart))
        norm = lp_norm(unit, handle.p)
        if norm == 0.0:
            raise MalformedInputError("ray directions must be non-zero")
        target = handle.atlas.point(o.chart, o.vec + unit / norm * horizon)
        ray = cls(handle, o, target)
        ray.horizon = min(float(horizon), ray.length)
        return ray

    @property
    def reach(self) -> float:
        return min(self.horizon, self.length)

    def eval(self, t: float) -> SpacePoint:
        if t < 0 or t > self.horizon:
            raise HorizonError(f"ray parameter {t:g} is outside [0, {self.horizon:g}]")
        return point_at_arclength(self.space, self.path, min(t, self.length), self.p)

    def metric(self, a: SpacePoint, b: SpacePoint) -> float:
        return self.handle.distance(a, b)

    def __repr__(self) -> str:
        return f"TruncatedRay({self.base} -> {self.target}, horizon={self.horizon:g})"


class ProductRay:
    """t -> (rayX(a t), rayY(b t)) in the l^p product of the two ray spaces."""

    def __init__(
        self,
        space: ChartAtlas,
        ray_x: Ray,
        ray_y: Ray,
        a: float,
        b: float,
        p: PExponent,
        opts: EngineOptions | None = None,
    ):
        self.space = space
        self.ray_x, self.ray_y = ray_x, ray_y
        self.a, self.b = a, b
        self.p = parse_p(p)
        self.opts = opts or EngineOptions()
        self.base = space.canonicalize(product_point(space, ray_x.base, ray_y.base))
        self.horizon = min(_scaled(ray_x.horizon, a), _scaled(ray_y.horizon, b))

    @property
    def reach(self) -> float:
        reach_x = _scaled(self.ray_x.reach, self.a)
        return min(self.horizon, reach_x, _scaled(self.ray_y.reach, self.b))

    def eval(self, t: float) -> SpacePoint:
        if t < 0 or t > self.horizon:
            raise HorizonError(f"ray parameter {t:g} is outside [0, {self.horizon:g}]")
        point = product_point(self.space, self.ray_x.eval(self.a * t), self.ray_y.eval(self.b * t))
        return self.space.canonicalize(point)

    def metric(self, a: SpacePoint, b: SpacePoint) -> float:
        a, b = sorted((a, b), key=str)
        return distance(self.space, a, b, self.p, self.opts)

    def __repr__(self) -> str:
        return f"ProductRay(a={self.a:g}, b={self.b:g}, p={p_label(self.p)})"


def _scaled(limit: float, speed: float) -> float:
    return math.inf if speed == 0 else limit / speed


def _as_ray(ray: Ray | SpacePoint, o: SpacePoint, handle: BicombingHandle | None) -> Ray:
    if not isinstance(ray, SpacePoint):
        return ray
    if handle is None:
        raise MalformedInputError(f"point {ray} needs a handle to become a ray")
    return TruncatedRay.from_point(handle, o, ray)


def _check_base(space: ChartAtlas, o: SpacePoint, *rays: Ray) -> None:
    for ray in rays:
        if not space.same_point(ray.base, o):
            raise MalformedInputError(f"ray starts at {ray.base}, not at the basepoint {o}")


def exp_map(
    space: ChartAtlas,
    handle: BicombingHandle,
    o: SpacePoint,
    x: Ray | SpacePoint,
    t: float,
) -> SpacePoint:
    """rho_o^x(t); point inputs stop once they reach x."""
    if t < 0:
        raise MalformedInputError(f"exponential map parameter {t:g} is negative")
    ray = _as_ray(x, o, handle)
    _check_base(space, o, ray)
    return ray.eval(t)


def d_o_metric(
    space: ChartAtlas,
    o: SpacePoint,
    ray1: Ray | SpacePoint,
    ray2: Ray | SpacePoint,
    n_terms: int = 40,
    handle: BicombingHandle | None = None,
) -> BoundaryMetricValue:
    """Partial sum of 2^-n min(d(rho1(n), rho2(n)), 1) up to n_terms."""
    first, second = _as_ray(ray1, o, handle), _as_ray(ray2, o, handle)
    _check_base(space, o, first, second)
    if n_terms < 1:
        raise MalformedInputError("d_o needs at least one term")
    if n_terms > first.horizon or n_terms > second.horizon:
        raise HorizonError(
            f"{n_terms} terms need horizons of at least {n_terms}, "
            f"got {first.horizon:g} and {second.horizon:g}"
        )
    total = 0.0
    for n in range(1, n_terms + 1):
        gap = first.metric(first.eval(float(n)), second.eval(float(n)))
        total += 2.0**-n * min(gap, 1.0)
    return BoundaryMetricValue(value=total, truncation_bound=2.0**-n_terms)


def d_oC_metric(
    space: ChartAtlas,
    o: SpacePoint,
    c: float,
    ray1: Ray | SpacePoint,
    ray2: Ray | SpacePoint,
    handle: BicombingHandle | None = None,
) -> float:
    """1 / t for the time t at which the rays separate to distance c."""
    if c <= 0:
        raise MalformedInputError(f"the separation constant must be positive, got {c:g}")
    first, second = _as_ray(ray1, o, handle), _as_ray(ray2, o, handle)
    _check_base(space, o, first, second)
    last = min(first.reach, second.reach)
    if math.isinf(last):
        last = min(first.horizon, second.horizon)

    def separation(t: float) -> float:
        return first.metric(first.eval(t), second.eval(t))

    far = separation(last)
    if far <= BISECTION_TOL:
        return 0.0
    if far < c:
        raise NotSeparatedError(
            f"rays reach separation {far:.6g} < {c:g} by time {last:.6g}"
        )
    lo, hi = 0.0, last
    for _ in range(BISECTION_ITERS):
        if hi - lo <= BISECTION_TOL:
            break
        mid = 0.5 * (lo + hi)
        if separation(mid) < c:
            lo = mid
        else:
            hi = mid
    return 1.0 / (0.5 * (lo + hi))


def asymptotic_verdict(
    ray1: Ray, ray2: Ray, bound: float | None = None, samples: int = 64
) -> AsymptoticVerdict:
    """Reads the convex separation function D(t) over the shared horizon."""
    last = min(ray1.horizon, ray2.horizon, max(ray1.reach, ray2.reach))
    ts = np.linspace(0.0, last, samples)
    gaps = np.array([ray1.metric(ray1.eval(float(t)), ray2.eval(float(t))) for t in ts])
    limit = gaps[0] if bound is None else bound
    if np.all(np.diff(gaps) <= MONOTONE_SLACK) and np.max(gaps) <= limit + MONOTONE_SLACK:
        return AsymptoticVerdict.ASYMPTOTIC
    if gaps[-1] > gaps[0] + DIVERGENCE_TOL:
        return AsymptoticVerdict.DIVERGENT
    return AsymptoticVerdict.INCONCLUSIVE


def product_ray(
    ray_x: Ray,
    ray_y: Ray,
    a: float,
    b: float,
    p: PExponent,
    space: ChartAtlas | None = None,
    opts: EngineOptions | None = None,
) -> ProductRay:
    p = parse_p(p)
    if a < 0 or b < 0 or abs(lp_norm((a, b), p) - 1.0) > NORM_TOL:
        raise NormConstraintError(
            f"(a, b) = ({a:g}, {b:g}) must be non-negative with unit l^{p_label(p)} norm"
        )
    if space is None:
        space = lp_product(ray_x.space, ray_y.space, p)
    return ProductRay(space, ray_x, ray_y, a, b, p, opts)


def ray_speed_error(ray: Ray, samples: int = 16, span: float | None = None) -> float:
    """Worst | d(rho(s), rho(t)) - |t - s| | on sampled parameters up to the reach."""
    last = ray.reach if span is None else min(span, ray.reach)
    if math.isinf(last):
        raise HorizonError("speed checks need a finite span")
    ts = np.linspace(0.0, last, samples)
    pts = [ray.eval(float(t)) for t in ts]
    worst = 0.0
    for i, j in itertools.combinations(range(samples), 2):
        worst = max(worst, abs(ray.metric(pts[i], pts[j]) - (ts[j] - ts[i])))
    return worst


def reparametrize_ray(
    space: ChartAtlas,
    ray: TruncatedRay,
    target_p: PExponent,
    opts: EngineOptions | None = None,
) -> TruncatedRay:
    """The same trajectory at unit d_target speed, certified to be a target-p geodesic."""
    target_p = parse_p(target_p)
    opts = opts or ray.handle.opts
    length = path_length(ray.path, target_p)
    reached = distance(space, ray.base, ray.target, target_p, opts)
    if length > reached + opts.certificate_tol * (1.0 + reached):
        raise CertificateError(
            f"the ray trajectory has p={p_label(target_p)} length {length:.12g}, "
            f"exceeding the distance {reached:.12g}"
        )
    handle = BicombingHandle(space, target_p, ray.handle.method, opts)
    horizon = None if math.isinf(ray.horizon) else length * ray.horizon / ray.length
    return TruncatedRay(handle, ray.base, ray.target, horizon, path=ray.path)


def _far_anchors(
    space: ChartAtlas, o: SpacePoint, radius: float, rays: int, p: PExponent
) -> list[SpacePoint]:
    anchors = []
    located = {twin.chart: twin.vec for twin in space.equivalents(o)}
    for chart_id in space.charts:
        lo, hi = space.chart_bounds(chart_id)
        center = located.get(chart_id, np.zeros(lo.size))
        if np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)):
            for corner in itertools.product(*zip(lo, hi)):
                anchors.append(space.point(chart_id, corner))
            continue
        if lo.size == 2:
            angles = np.linspace(0.0, 2.0 * np.pi, rays, endpoint=False)
            directions = np.column_stack([np.cos(angles), np.sin(angles)])
        else:
            eye = np.eye(lo.size)
            directions = np.vstack([eye, -eye])
        for direction in directions:
            far = np.clip(center + direction / lp_norm(direction, p) * radius, lo, hi)
            anchors.append(space.point(chart_id, far))
    return anchors


def coverage_radius(
    space: ChartAtlas,
    handle: BicombingHandle,
    o: SpacePoint,
    radius: float,
    sampler: PointSampler,
    rays: int = 64,
    samples: int = 200,
) -> CoverageReport:
    """Largest sampled gap from B(o, 3R/4) to geodesics from o towards far anchors."""
    if radius <= 0:
        raise MalformedInputError("coverage needs a positive radius")
    anchors = _far_anchors(space, o, math.sqrt(2.0) * radius, rays, handle.p)
    proxies = [handle.geodesic(o, anchor) for anchor in anchors if not space.same_point(o, anchor)]
    kept: list[SpacePoint] = []
    index = 0
    while len(kept) < samples and index < 20 * samples:
        x = sampler.points(index, 1)[0]
        if handle.distance(o, x) <= COVERAGE_SHARE * radius:
            kept.append(x)
        index += 1

    def gap(x: SpacePoint) -> float:
        if not proxies:
            return handle.distance(o, x)
        return min(gap_to_path(space, x, path, handle.p, handle.opts) for path in proxies)

    gaps = run_concurrently(gap, kept)
    note = None
    if space.bounded:
        note = "compact space: rays stop at the chart corners, coverage is degenerate"
    report = CoverageReport(
        radius=max(gaps, default=0.0),
        resolution=1.5 * math.sqrt(2.0) * radius * math.sin(math.pi / rays),
        samples=len(kept),
        rays=len(proxies),
        note=note,
    )
    logger.info(f"Coverage on {space.family} at R={radius:g}: {report.radius:.6g}")
    return report


def check_quasisymmetry(
    space: ChartAtlas,
    handle: BicombingHandle,
    o: SpacePoint,
    o2: SpacePoint,
    c: float,
    c2: float,
    directions: Sequence[Sequence[float]],
    horizon: float = DEFAULT_HORIZON,
) -> QuasisymmetryReport:
    """Worst excesses of the scale and basepoint comparisons of d_{o,C} over direction pairs.

    Rays from o and o2 along the same chart direction stand for the same boundary point.
    """
    if not 0 < c <= c2:
        raise MalformedInputError("scale comparison needs 0 < C <= C'")
    shift = handle.distance(o, o2)
    if c <= 2.0 * shift:
        raise MalformedInputError(f"basepoint comparison needs C > 2 d(o, o') = {2 * shift:g}")
    from_o = [TruncatedRay.from_direction(handle, o, d, horizon) for d in directions]
    from_o2 = [TruncatedRay.from_direction(handle, o2, d, horizon) for d in directions]
    scale_excess = basepoint_excess = 0.0
    pairs = list(itertools.combinations(range(len(directions)), 2))
    for i, j in pairs:
        near = d_oC_metric(space, o, c, from_o[i], from_o[j])
        far = d_oC_metric(space, o, c2, from_o[i], from_o[j])
        moved = d_oC_metric(space, o2, c, from_o2[i], from_o2[j])
        scale_excess = max(scale_excess, far - near, near - c2 / c * far)
        basepoint_excess = max(basepoint_excess, near - c / (c - 2.0 * shift) * moved)
    return QuasisymmetryReport(
        samples=len(pairs), scale_excess=scale_excess, basepoint_excess=basepoint_excess
    )


def _block_ends(blocks: Sequence[float], n_min: int, n_max: int) -> list[int]:
    ends = [n for n in range(1, n_max) if blocks[n - 1] != blocks[n] and n >= n_min]
    return ends + [n_max]


def halfplane_divergence_probe(
    blocks: Sequence[float] | None = None,
    a: float = 0.5,
    n_max: int = 10_000,
    growth: int = CESARO_GROWTH,
    threshold: float = 0.1,
    n_min: int = 64,
    cross_check: bool = True,
) -> HalfplaneProbeReport:
    """Oscillating running means and the recurring d_inf gaps of the points (1, a S_n / n).

    The gaps are read between consecutive block ends past n_min; the sequence is reported
    non-Cauchy when at least two gaps reach the threshold.
    """
    if blocks is None:
        blocks = cesaro_block_sequence(n_max, growth)
    if len(blocks) < n_max or n_min >= n_max:
        raise MalformedInputError(f"the probe needs {n_max} block entries and n_min < n_max")
    means = np.cumsum(np.asarray(blocks[:n_max], dtype=float)) / np.arange(1, n_max + 1)
    window = means[n_min - 1:]
    oscillation = float(window.max() - window.min())
    ends = _block_ends(blocks, n_min, n_max)
    events = []
    for start, end in zip(ends, ends[1:]):
        gap = a * abs(float(means[end - 1] - means[start - 1]))
        if gap >= threshold:
            events.append(GapEvent(start=start, end=end, gap=gap))
    engine_error = halfplane_engine_error() if cross_check else None
    logger.info(
        f"Half-plane probe: oscillation {oscillation:.4f}, {len(events)} gaps >= {threshold:g}"
    )
    return HalfplaneProbeReport(
        oscillation=oscillation,
        gap_events=events,
        non_cauchy=len(events) >= 2,
        threshold=threshold,
        a=a,
        n_max=n_max,
        engine_max_error=engine_error,
    )


def halfplane_engine_error(heights: Sequence[float] = (0.0, 0.5, 1.0, 1.5)) -> float:
    """Engine distances on a two-cell prefix against the product formula.

    From the chain start at height 0 to the far corner of the diagonal square at height h the
    l^p product distance is ||(1 + 2^(1/p), h)||_p.
    """
    worst = 0.0
    for p in (2.0, P_INF):
        space = halfplane_complex([1.0, math.sqrt(2.0)], 2, p)
        start = space.point("C1xL1", (0.0, 0.0))
        chain = 1.0 + lp_norm((1.0, 1.0), p)
        for h in heights:
            end = space.point("C2xL1", (1.0, 1.0, h)) if h <= 1 else space.point(
                "C2xL2", (1.0, 1.0, h - 1.0)
            )
            predicted = lp_norm((chain, h), p)
            worst = max(worst, abs(distance(space, start, end, p) - predicted))
    return worst
