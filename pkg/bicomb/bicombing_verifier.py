import logging
from typing import Callable, Iterable, Sequence

import numpy as np

from bicomb.atlas_manager import ChartAtlas, apply_isometry
from bicomb.custom_types import Axiom, BicombingMethod, DictWithStringKeys, PExponent, Vector
from bicomb.exceptions import IsometryError, MalformedInputError
from bicomb.geodesic_engine import (
    BicombingHandle,
    assemble_path,
    distance,
    involution_fixed_point,
    trajectory_hausdorff,
)
from bicomb.lp_geometry import as_coord_vec, lp_norm, parse_p
from bicomb.models import (
    AxiomReport,
    ChartMap,
    DisplacementEstimate,
    EngineOptions,
    IsometrySpec,
    SpacePoint,
)
from bicomb.sampler import PointSampler
from bicomb.utils import run_concurrently

logger = logging.getLogger(__name__)

CONSISTENCY_PARAMS = 32
DYADIC_LEVEL = 4
CORRUPTION_AMPLITUDE = 0.05
ISOMETRY_TOL = 1e-9
FIXED_TOL = 1e-12

# (points per sample, times per sample)
SAMPLE_SHAPES: dict[Axiom, tuple[int, int]] = {
    Axiom.CONICAL: (4, 1),
    Axiom.CONSISTENT: (2, 2),
    Axiom.CONVEX: (4, 2),
    Axiom.REVERSIBLE: (2, 1),
    Axiom.EQUIVARIANT: (2, 1),
    Axiom.FIXED_SET_CONVEX: (2, 1),
    Axiom.PROJECTION: (3, 1),
}

Violation = Callable[[BicombingHandle, list[SpacePoint], list[float], IsometrySpec | None], float]


def _conical(handle, pts, times, isometry) -> float:
    x, y, x2, y2 = pts
    t = times[0]
    gap = handle.distance(handle.eval(x, y, t), handle.eval(x2, y2, t))
    bound = (1.0 - t) * handle.distance(x, x2) + t * handle.distance(y, y2)
    return max(0.0, gap - bound)


def _consistent(handle, pts, times, isometry) -> float:
    x, y = pts
    s, t = times
    a, b = handle.eval(x, y, s), handle.eval(x, y, t)
    worst = 0.0
    for u in np.linspace(0.0, 1.0, CONSISTENCY_PARAMS):
        along = handle.eval(x, y, min(1.0, s + float(u) * (t - s)))
        worst = max(worst, handle.distance(along, handle.eval(a, b, float(u))))
    return worst


def _convex(handle, pts, times, isometry) -> float:
    x, y, x2, y2 = pts
    s, t = times

    def gap(r: float) -> float:
        return handle.distance(handle.eval(x, y, r), handle.eval(x2, y2, r))

    return max(0.0, gap(0.5 * (s + t)) - 0.5 * (gap(s) + gap(t)))


def _reversible(handle, pts, times, isometry) -> float:
    x, y = pts
    t = times[0]
    return handle.distance(handle.eval(x, y, t), handle.eval(y, x, 1.0 - t))


def _equivariant(handle, pts, times, isometry) -> float:
    x, y = pts
    t = times[0]
    atlas = handle.atlas
    moved = apply_isometry(atlas, isometry, handle.eval(x, y, t))
    image = handle.eval(apply_isometry(atlas, isometry, x), apply_isometry(atlas, isometry, y), t)
    return handle.distance(moved, image)


def _fixed_set(handle, pts, times, isometry) -> float:
    x, y = pts
    q = handle.eval(x, y, times[0])
    return handle.distance(q, apply_isometry(handle.atlas, isometry, q))


def projection_gap(
    handle: BicombingHandle, o: SpacePoint, x: SpacePoint, y: SpacePoint, r: float
) -> tuple[float, float]:
    """(d(rho_o^x(r), rho_o^y(r)), 2 d(x, y) r / d(o, x)) for rays stopped at x and y."""
    to_x, to_y = handle.distance(o, x), handle.distance(o, y)
    if to_x == 0.0:
        return 0.0, float("inf")
    a = handle.eval(o, x, min(r / to_x, 1.0))
    b = handle.eval(o, y, min(r / to_y, 1.0)) if to_y > 0 else o
    return handle.distance(a, b), 2.0 * handle.distance(x, y) * r / to_x


def _projection(handle, pts, times, isometry) -> float:
    o, x, y = pts
    reach = max(handle.distance(o, x), handle.distance(o, y))
    r = times[0] * reach if times[0] > 0 else reach
    if reach == 0.0:
        return 0.0
    lhs, bound = projection_gap(handle, o, x, y, r)
    return max(0.0, lhs - bound)


VIOLATIONS: dict[Axiom, Violation] = {
    Axiom.CONICAL: _conical,
    Axiom.CONSISTENT: _consistent,
    Axiom.CONVEX: _convex,
    Axiom.REVERSIBLE: _reversible,
    Axiom.EQUIVARIANT: _equivariant,
    Axiom.FIXED_SET_CONVEX: _fixed_set,
    Axiom.PROJECTION: _projection,
}


def _draw(
    sampler: PointSampler, axiom: Axiom, index: int
) -> tuple[list[SpacePoint], list[float]]:
    n_points, n_times = SAMPLE_SHAPES[axiom]
    rng = sampler.rng(index)
    pts = [sampler.point(rng) for _ in range(n_points)]
    if axiom == Axiom.CONVEX:
        steps = 1 << DYADIC_LEVEL
        i, j = sorted(rng.choice(steps + 1, size=2, replace=False).tolist())
        times = [i / steps, j / steps]
    elif n_times == 2:
        times = sorted(float(t) for t in rng.uniform(0.0, 1.0, size=2))
    else:
        times = [float(rng.uniform(0.0, 1.0))]
    return pts, times


def _witness(pts: Sequence[SpacePoint], times: Sequence[float], index: int) -> DictWithStringKeys:
    return {
        "index": index,
        "points": [{"chart": q.chart, "coords": list(q.coords)} for q in pts],
        "times": list(times),
    }


def _report(
    handle: BicombingHandle,
    axiom: Axiom,
    sampler: PointSampler,
    samples: int,
    isometry: IsometrySpec | None,
    tol: float,
    prepare: Callable[[list[SpacePoint]], list[SpacePoint]] | None = None,
) -> AxiomReport:
    violation = VIOLATIONS[axiom]

    def run(index: int) -> tuple[float, int, list[SpacePoint], list[float]]:
        pts, times = _draw(sampler, axiom, index)
        if prepare is not None:
            pts = prepare(pts)
        return violation(handle, pts, times, isometry), index, pts, times

    results = run_concurrently(run, list(range(samples)))
    worst, index, pts, times = max(results, key=lambda r: (r[0], -r[1]))
    note = None
    if worst > tol:
        note = f"exceeds tolerance {tol:g}"
        logger.warning(f"{axiom.value} violation {worst:.3g} on {handle.atlas.family}")
    logger.info(f"Checked {axiom.value} on {samples} samples: max violation {worst:.3g}")
    return AxiomReport(
        axiom=axiom,
        samples=samples,
        seed=sampler.seed,
        max_violation=max(0.0, worst),
        witness=_witness(pts, times, index),
        note=note,
    )


def check_axioms(
    handle: BicombingHandle,
    axioms: Iterable[Axiom],
    sampler: PointSampler,
    tol: float | None = None,
    samples: int = 1000,
    isometry: IsometrySpec | None = None,
) -> list[AxiomReport]:
    """Worst sampled violation per axiom; violations are reported, never raised."""
    tol = handle.opts.certificate_tol if tol is None else tol
    reports = []
    for axiom in axioms:
        if axiom in (Axiom.EQUIVARIANT, Axiom.FIXED_SET_CONVEX) and isometry is None:
            raise MalformedInputError(f"checking {axiom.value} needs an isometry")
        if axiom == Axiom.FIXED_SET_CONVEX:
            reports.append(check_fixed_set_convexity(handle, isometry, sampler, tol, samples))
        else:
            reports.append(_report(handle, axiom, sampler, samples, isometry, tol))
    return reports


def check_fixed_set_convexity(
    handle: BicombingHandle,
    isometry: IsometrySpec,
    sampler: PointSampler,
    tol: float | None = None,
    samples: int = 1000,
) -> AxiomReport:
    """Geodesics between fixed points of an equivariant handle's isometry stay fixed.

    Sampled points that the isometry moves are replaced by m(x, gx).
    """
    tol = handle.opts.certificate_tol if tol is None else tol

    def fixed(pts: list[SpacePoint]) -> list[SpacePoint]:
        out = []
        for x in pts:
            image = apply_isometry(handle.atlas, isometry, x)
            if handle.distance(x, image) > FIXED_TOL:
                x = involution_fixed_point(handle, isometry, x)
            out.append(x)
        return out

    return _report(handle, Axiom.FIXED_SET_CONVEX, sampler, samples, isometry, tol, prepare=fixed)


def reevaluate_witness(
    handle: BicombingHandle, report: AxiomReport, isometry: IsometrySpec | None = None
) -> float:
    """Recomputes a report's violation from the tuple stored in its witness."""
    if report.witness is None:
        raise MalformedInputError("the report carries no witness")
    pts = [handle.atlas.point(q["chart"], q["coords"]) for q in report.witness["points"]]
    return max(0.0, VIOLATIONS[report.axiom](handle, pts, report.witness["times"], isometry))


def check_ccc_implication(
    handle: BicombingHandle, sampler: PointSampler, tol: float | None = None, samples: int = 1000
) -> AxiomReport:
    """Convexity report of a handle whose conical and consistent reports pass.

    reference_violation carries the conical violation; the implication holds when the convex
    violation stays below twice that plus tol.
    """
    tol = handle.opts.certificate_tol if tol is None else tol
    conical, consistent, convex = check_axioms(
        handle, (Axiom.CONICAL, Axiom.CONSISTENT, Axiom.CONVEX), sampler, tol, samples
    )
    update: DictWithStringKeys = {"reference_violation": conical.max_violation, "note": None}
    if conical.max_violation > tol or consistent.max_violation > tol:
        update["note"] = (
            f"skipped: precondition fails (conical {conical.max_violation:.3g}, "
            f"consistent {consistent.max_violation:.3g} above {tol:g})"
        )
    return convex.model_copy(update=update)


def ccc_implication_holds(report: AxiomReport, tol: float) -> bool:
    if report.note is not None and report.note.startswith("skipped"):
        return True
    return report.max_violation <= 2.0 * (report.reference_violation or 0.0) + tol


def check_projection_inequality(
    space: ChartAtlas,
    handle: BicombingHandle,
    sampler: PointSampler,
    tol: float | None = None,
    samples: int = 1000,
) -> AxiomReport:
    """Worst excess of d(rho_o^x(r), rho_o^y(r)) over 2 d(x, y) r / d(o, x)."""
    if handle.atlas is not space:
        raise MalformedInputError("the handle belongs to a different space")
    tol = handle.opts.certificate_tol if tol is None else tol
    return _report(handle, Axiom.PROJECTION, sampler, samples, None, tol)


class CorruptedHandle(BicombingHandle):
    """Negative control: pushes the last coordinate of s(x, y, t) by a 4t(1 - t) d(x, y)."""

    def __init__(self, base: BicombingHandle, amplitude: float = CORRUPTION_AMPLITUDE):
        super().__init__(base.atlas, base.p, BicombingMethod.CORRUPTED, base.opts)
        self.base = base
        self.amplitude = amplitude
        self._geodesic = base._geodesic
        self._distance = base._distance

    def eval(self, x: SpacePoint, y: SpacePoint, t: float) -> SpacePoint:
        point = self.base.eval(x, y, t)
        if t in (0.0, 1.0):
            return point
        vec = point.vec
        vec[-1] += self.amplitude * 4.0 * t * (1.0 - t) * self.base.distance(x, y)
        lo, hi = self.atlas.chart_bounds(point.chart)
        return self.atlas.canonicalize(self.atlas.point(point.chart, np.clip(vec, lo, hi)))

    def describe(self) -> DictWithStringKeys:
        return {**super().describe(), "amplitude": self.amplitude}


def corrupt_handle(
    handle: BicombingHandle, amplitude: float = CORRUPTION_AMPLITUDE
) -> BicombingHandle:
    return CorruptedHandle(handle, amplitude)


def translation(
    chart_ids: Iterable[str], vector: Sequence[float], name: str | None = None
) -> IsometrySpec:
    """The same translation applied in every listed chart."""
    vector = [float(v) for v in vector]
    identity = np.eye(len(vector)).tolist()
    return IsometrySpec(
        name=name or "translate:" + ",".join(f"{v:g}" for v in vector),
        maps=[ChartMap(source=c, target=c, matrix=identity, offset=vector) for c in chart_ids],
    )


def reflection(atlas: ChartAtlas, chart_id: str, name: str | None = None) -> IsometrySpec:
    """(x, y) -> (x, -y) on one plane, the identity on every other chart."""
    maps = []
    for other in atlas.charts:
        dim = atlas.dim(other)
        matrix = np.eye(dim)
        if other == chart_id:
            matrix[-1, -1] = -1.0
        maps.append(
            ChartMap(source=other, target=other, matrix=matrix.tolist(), offset=[0.0] * dim)
        )
    return IsometrySpec(name=name or f"reflect:{chart_id}", maps=maps)


def named_isometry(atlas: ChartAtlas, name: str) -> IsometrySpec:
    """identity, translate:a,b (every chart) or reflect:CHART."""
    kind, _, arg = name.partition(":")
    if kind == "identity":
        dims = {atlas.dim(c) for c in atlas.charts}
        return translation(atlas.charts, [0.0] * max(dims), "identity")
    if kind == "translate" and arg:
        try:
            vector = [float(v) for v in arg.split(",")]
        except ValueError as e:
            raise MalformedInputError(f"cannot read translation {arg!r}") from e
        return translation(atlas.charts, vector)
    if kind == "reflect" and arg:
        atlas.chart(arg)
        return reflection(atlas, arg)
    raise MalformedInputError(f"unknown isometry {name!r}")


def check_isometry(
    space: ChartAtlas,
    isometry: IsometrySpec,
    sampler: PointSampler,
    p: PExponent,
    opts: EngineOptions | None = None,
    pairs: int = 32,
) -> None:
    """Raises IsometryError unless the map preserves sampled distances within 1e-9."""
    opts = opts or EngineOptions()
    for index in range(pairs):
        x, y = sampler.points(index, 2)
        try:
            gx, gy = apply_isometry(space, isometry, x), apply_isometry(space, isometry, y)
        except MalformedInputError as e:
            raise IsometryError(f"isometry {isometry.name or 'unnamed'}: {e}") from e
        before = distance(space, x, y, p, opts)
        after = distance(space, gx, gy, p, opts)
        if abs(before - after) > ISOMETRY_TOL * (1.0 + before):
            raise IsometryError(
                f"isometry {isometry.name or 'unnamed'} moves d({x}, {y}) from "
                f"{before:.12g} to {after:.12g}"
            )


def _descend(
    space: ChartAtlas,
    x: SpacePoint,
    value: float,
    displaced: Callable[[SpacePoint], float],
    iters: int,
    step: float,
) -> tuple[SpacePoint, float]:
    lo, hi = space.chart_bounds(x.chart)
    vec = x.vec
    for _ in range(iters):
        improved = False
        for j in range(vec.size):
            for sign in (1.0, -1.0):
                trial = vec.copy()
                trial[j] += sign * step
                trial = np.clip(trial, lo, hi)
                candidate = space.point(x.chart, trial)
                trial_value = displaced(candidate)
                if trial_value < value:
                    vec, value, improved = trial, trial_value, True
        if not improved:
            step /= 2.0
    return space.canonicalize(space.point(x.chart, vec)), value


def displacement(
    space: ChartAtlas,
    isometry: IsometrySpec,
    sampler: PointSampler,
    refine_iters: int = 20,
    p: PExponent = 2.0,
    samples: int = 200,
    opts: EngineOptions | None = None,
    tol: float = 1e-6,
) -> DisplacementEstimate:
    """Smallest sampled d(x, gx) after coordinate descent from the three best samples."""
    opts = opts or EngineOptions()
    p = parse_p(p)
    check_isometry(space, isometry, sampler, p, opts)

    def displaced(x: SpacePoint) -> float:
        return distance(space, x, apply_isometry(space, isometry, x), p, opts)

    pts = sampler.points(0, samples)
    values = run_concurrently(displaced, pts)
    scored = list(zip(values, pts))
    best = sorted(range(len(scored)), key=lambda i: (scored[i][0], i))[:3]
    for i in best:
        refined, value = _descend(
            space, pts[i], values[i], displaced, refine_iters, sampler.radius / 4
        )
        scored.append((value, refined))
    estimate = min(value for value, _ in scored)
    near = [x for value, x in scored if value <= estimate + tol]
    logger.info(f"Displacement of {isometry.name or 'isometry'}: {estimate:.12g}")
    return DisplacementEstimate(inf_estimate=estimate, near_min_points=near, samples=samples)


def axis_check(
    space: ChartAtlas,
    handle: BicombingHandle,
    isometry: IsometrySpec,
    basepoint: SpacePoint,
    direction: Sequence[float] | Vector,
    period: float,
    tol: float = 1e-7,
    samples: int = 16,
) -> bool:
    """Whether the chart line through basepoint is an axis of the isometry with period T.

    The line is parametrized at unit d_p speed; it must be shifted by T, realize distances and
    match the handle's trajectories on sampled sub-segments.
    """
    p = handle.p
    unit = as_coord_vec(direction)
    unit = unit / lp_norm(unit, p)
    chart, base = basepoint.chart, basepoint.vec
    ts = np.linspace(0.0, 2.0 * period, samples)
    try:
        line = {
            float(t): space.point(chart, base + t * unit)
            for t in np.concatenate([ts, ts + period])
        }
    except MalformedInputError:
        return False
    for t in ts:
        shifted = apply_isometry(space, isometry, line[float(t)])
        if handle.distance(shifted, line[float(t + period)]) > tol:
            return False
    for s, t in list(zip(ts, ts[1:])) + [(ts[0], ts[-1])]:
        a, b = line[float(s)], line[float(t)]
        if abs(handle.distance(a, b) - (t - s)) > tol * (1.0 + t - s):
            return False
        segment = assemble_path(space, a, b, [(chart, a.vec, b.vec)], p, handle.method)
        gap = trajectory_hausdorff(
            space, handle.geodesic(a, b), segment, p, handle.opts, per_segment=8
        )
        if gap > tol * (1.0 + t - s):
            return False
    return True
