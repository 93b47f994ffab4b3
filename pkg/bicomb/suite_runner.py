import itertools
import logging
import math
import time
from typing import Callable, Sequence

import numpy as np

from bicomb.atlas_manager import ChartAtlas
from bicomb.bicombing_verifier import (
    ccc_implication_holds,
    check_axioms,
    check_ccc_implication,
    check_projection_inequality,
    corrupt_handle,
    projection_gap,
    translation,
)
from bicomb.boundary_manager import (
    TruncatedRay,
    asymptotic_verdict,
    check_quasisymmetry,
    coverage_radius,
    d_o_metric,
    d_oC_metric,
    halfplane_divergence_probe,
    product_ray,
    ray_speed_error,
    reparametrize_ray,
)
from bicomb.custom_types import AsymptoticVerdict, Axiom, BicombingMethod, CaseStatus
from bicomb.env import default_seed
from bicomb.exceptions import CertificateError, MalformedInputError
from bicomb.geodesic_engine import (
    BicombingHandle,
    distance,
    geodesic,
    midpoint_trace,
    reversibilize,
    trajectory_hausdorff,
)
from bicomb.grid_oracle import DEFAULT_RESOLUTION, grid_oracle_distance, oracle_error_bound
from bicomb.helly_manager import (
    ball,
    build_patch,
    certificate_holds,
    helly_check,
    pairwise_intersecting,
    patch_witness,
)
from bicomb.lp_geometry import P_INF, lp_norm, p_label
from bicomb.models import SuiteCase, SuiteResult
from bicomb.sampler import PointSampler
from bicomb.space_builder import build_space, named_spec
from bicomb.utils import run_concurrently

logger = logging.getLogger(__name__)

TRIVIAL = "trivial"
DERIVED = "derived"
DOCUMENTED = "documented-counterexample"

AXIOM_TOL = 1e-7
NEGATIVE_CONTROL_FLOOR = 1e-3
LSP_NAMES = [f"lsp{i}" for i in range(1, 6)]

Suite = Callable[[int, bool], list[SuiteCase]]


def _space(name: str, **params) -> ChartAtlas:
    return build_space(named_spec(name, params))


def _count(full: int, quick: bool) -> int:
    return max(1, full // 10) if quick else full


def _at_most(case_id: str, metric: float, tol: float, provenance: str, detail=None) -> SuiteCase:
    status = CaseStatus.PASS if metric <= tol else CaseStatus.FAIL
    return SuiteCase(
        id=case_id,
        status=status,
        metric=metric,
        tolerance=tol,
        provenance=provenance,
        detail=detail,
    )


def _holds(case_id: str, ok: bool, provenance: str, metric=None, detail=None) -> SuiteCase:
    return SuiteCase(
        id=case_id,
        status=CaseStatus.PASS if ok else CaseStatus.FAIL,
        metric=metric,
        provenance=provenance,
        detail=detail,
    )


def trajectory_equality_suite(seed: int, quick: bool) -> list[SuiteCase]:
    """l^2 and direct l^inf trajectories coincide on the five model spaces."""
    pairs = _count(200, quick)
    cases = []
    for name in LSP_NAMES:
        space = _space(name)
        sampler = PointSampler(space, seed)

        def gap(index: int) -> float:
            x, y = sampler.points(index, 2)
            euclid = geodesic(space, x, y, 2.0)
            chebyshev = geodesic(space, x, y, P_INF, method=BicombingMethod.DIRECT_LP)
            length = euclid.lengths[p_label(2.0)]
            return trajectory_hausdorff(space, euclid, chebyshev, 2.0, per_segment=16) / (
                1.0 + length
            )

        worst = max(run_concurrently(gap, list(range(pairs))))
        cases.append(_at_most(f"{name}-l2-vs-linf", worst, 1e-6, DERIVED, f"{pairs} pairs"))
    return cases


def fxi_divergence_suite(seed: int, quick: bool) -> list[SuiteCase]:
    """The l^2 and l^inf trajectories of F x I cross the hinge fiber at different heights."""
    space = _space("fxi", p=2)
    x = space.point("C2xC1", (1.0, 0.0))
    y = space.point("C1xC1", (1.0, 1.0, 1.0))
    euclid = geodesic(space, x, y, 2.0)
    chebyshev = geodesic(space, x, y, P_INF, method=BicombingMethod.DIRECT_LP)
    expected_euclid = 1.0 / (1.0 + math.sqrt(2.0))
    cases = [
        _at_most(
            "l2-hinge-height",
            abs(euclid.segments[0].end[1] - expected_euclid),
            1e-6,
            DERIVED,
            f"crosses at {euclid.segments[0].end[1]:.9f}",
        ),
        _at_most(
            "linf-hinge-height",
            abs(chebyshev.segments[0].end[1] - 0.5),
            1e-6,
            DERIVED,
            f"crosses at {chebyshev.segments[0].end[1]:.9f}",
        ),
    ]
    gap = trajectory_hausdorff(space, euclid, chebyshev, 2.0)
    cases.append(_holds("trajectory-gap", gap >= 0.05, DERIVED, metric=gap))
    ray = TruncatedRay.from_point(BicombingHandle(space, P_INF, BicombingMethod.DIRECT_LP), x, y)
    try:
        reparametrize_ray(space, ray, 2.0)
        refused, detail = False, "the l^inf trajectory was certified for p=2"
    except CertificateError as e:
        refused, detail = True, str(e)
    cases.append(_holds("reparametrize-refused", refused, DERIVED, detail=detail))
    return cases


def helly_suite(seed: int, quick: bool) -> list[SuiteCase]:
    g45 = build_patch("gamma45")
    verdict = helly_check(g45, 1)
    found = verdict.counterexample
    certified = found is not None and certificate_holds(g45, found)
    cases = [
        _holds(
            "gamma45-counterexample-searched",
            certified,
            DOCUMENTED,
            metric=float(verdict.families_checked),
            detail=verdict.status,
        )
    ]
    witness = patch_witness("gamma45", g45)
    centers, radii = witness
    documented = pairwise_intersecting(g45, centers, radii) and not set.intersection(
        *(ball(g45, v, r) for v, r in zip(centers, radii))
    )
    cases.append(_holds("gamma45-documented-family", documented, DOCUMENTED))
    pair = ball(g45, centers[0], 1) & ball(g45, centers[2], 1)
    origin = g45.vertex("P1", (0, 0))
    cases.append(_holds("gamma45-pair-meets-at-origin", pair == {origin}, DOCUMENTED))
    cases.append(
        _holds("gamma45-origin-outside-third", origin not in ball(g45, centers[1], 1), DOCUMENTED)
    )
    g90 = build_patch("gamma90")
    verdict = helly_check(g90, 2, margin=3)
    cases.append(
        _holds(
            "gamma90-helly",
            verdict.status == "pass",
            DERIVED,
            metric=float(verdict.families_checked),
        )
    )
    return cases


AXIOM_SPACES: list[tuple[str, dict]] = [(name, {}) for name in LSP_NAMES] + [
    ("F", {}),
    ("F5", {}),
    ("ck_patch", {"angle": 90, "depth": 2}),
]
CORE_AXIOMS = (Axiom.CONICAL, Axiom.CONSISTENT, Axiom.CONVEX, Axiom.REVERSIBLE)
# l2 trajectories measured in d_2 and in d_inf
AXIOM_EXPONENTS = (2.0, P_INF)


def axioms_suite(seed: int, quick: bool) -> list[SuiteCase]:
    samples = _count(1000, quick)
    cases = []
    for (name, params), p in itertools.product(AXIOM_SPACES, AXIOM_EXPONENTS):
        space = _space(name, **params)
        handle = BicombingHandle(space, p)
        sampler = PointSampler(space, seed)
        for report in check_axioms(handle, CORE_AXIOMS, sampler, AXIOM_TOL, samples):
            case_id = f"{space.family}-p{p_label(p)}-{report.axiom.value}"
            cases.append(_at_most(case_id, report.max_violation, AXIOM_TOL, DERIVED))
    lsp2 = _space("lsp2")
    glide = translation(["P1", "P2"], (3.0, 0.0), "glide")
    (report,) = check_axioms(
        BicombingHandle(lsp2, 2.0),
        [Axiom.EQUIVARIANT],
        PointSampler(lsp2, seed),
        AXIOM_TOL,
        samples,
        isometry=glide,
    )
    cases.append(_at_most("lsp2-glide-equivariant", report.max_violation, AXIOM_TOL, DERIVED))
    plane = _space("lsp1")
    corrupted = corrupt_handle(BicombingHandle(plane, 2.0))
    (report,) = check_axioms(
        corrupted, [Axiom.CONVEX], PointSampler(plane, seed), AXIOM_TOL, samples
    )
    cases.append(
        _holds(
            "corrupted-convex-detected",
            report.max_violation >= NEGATIVE_CONTROL_FLOOR,
            TRIVIAL,
            metric=report.max_violation,
        )
    )
    return cases


def ccc_implication_suite(seed: int, quick: bool) -> list[SuiteCase]:
    samples = _count(1000, quick)
    cases = []
    for name, p in itertools.product(("lsp1", "lsp4"), AXIOM_EXPONENTS):
        space = _space(name)
        report = check_ccc_implication(
            BicombingHandle(space, p), PointSampler(space, seed), AXIOM_TOL, samples
        )
        cases.append(
            _holds(
                f"{name}-p{p_label(p)}-convex-within-twice-conical",
                ccc_implication_holds(report, AXIOM_TOL),
                DERIVED,
                metric=report.max_violation,
                detail=report.note,
            )
        )
    plane = _space("lsp1")
    report = check_ccc_implication(
        corrupt_handle(BicombingHandle(plane, 2.0)), PointSampler(plane, seed), AXIOM_TOL, samples
    )
    skipped = report.note is not None and report.note.startswith("skipped")
    cases.append(_holds("corrupted-precondition-fails", skipped, TRIVIAL, detail=report.note))
    return cases


def projection_suite(seed: int, quick: bool) -> list[SuiteCase]:
    samples = _count(1000, quick)
    plane = _space("lsp1")
    handle = BicombingHandle(plane, 2.0)
    o, x, y = plane.point("P1", (0, 0)), plane.point("P1", (10, 0)), plane.point("P1", (10, 1))
    lhs, bound = projection_gap(handle, o, x, y, 5.0)
    expected = lp_norm(np.array([5.0, 0.0]) - 5.0 * np.array([10.0, 1.0]) / math.sqrt(101.0), 2.0)
    cases = [
        _at_most("plane-closed-form", abs(lhs - expected), 1e-9, DERIVED, f"lhs {lhs:.9f}"),
        _holds("plane-closed-form-bound", lhs <= bound, DERIVED, metric=bound),
        _at_most("coincident-endpoints", projection_gap(handle, o, x, x, 5.0)[0], 0.0, TRIVIAL),
    ]
    for name, p in [(n, 2.0) for n in LSP_NAMES] + [("lsp2", P_INF)]:
        space = _space(name)
        report = check_projection_inequality(
            space, BicombingHandle(space, p), PointSampler(space, seed), AXIOM_TOL, samples
        )
        cases.append(_at_most(f"{name}-p{p_label(p)}", report.max_violation, AXIOM_TOL, DERIVED))
    return cases


def _plane_rays(handle: BicombingHandle, angles) -> list[TruncatedRay]:
    o = handle.atlas.point("P1", (0.0, 0.0))
    return [TruncatedRay.from_direction(handle, o, (math.cos(a), math.sin(a))) for a in angles]


def boundary_metrics_suite(seed: int, quick: bool) -> list[SuiteCase]:
    triples = _count(1000, quick)
    plane = _space("lsp1")
    o = plane.point("P1", (0.0, 0.0))
    euclid, chebyshev = BicombingHandle(plane, 2.0), BicombingHandle(plane, P_INF)
    e1, e2 = _plane_rays(euclid, (0.0, math.pi / 2))
    c1, c2 = _plane_rays(chebyshev, (0.0, math.pi / 2))
    cases = [
        _at_most(
            "l2-doc-axes", abs(d_oC_metric(plane, o, 1.0, e1, e2) - math.sqrt(2.0)), 1e-9, DERIVED
        ),
        _at_most("linf-doc-axes", abs(d_oC_metric(plane, o, 1.0, c1, c2) - 1.0), 1e-9, DERIVED),
        _at_most("doc-equal-rays", d_oC_metric(plane, o, 1.0, e1, e1), 0.0, TRIVIAL),
    ]
    for case_id, u, v in (("linf-do-axes", c1, c2), ("l2-do-axes", e1, e2)):
        value = d_o_metric(plane, o, u, v, 40)
        error = abs(value.value - (1.0 - 2.0**-40))
        cases.append(_at_most(case_id, error, value.truncation_bound, DERIVED))
    directions = np.linspace(0.0, 2.0 * math.pi, 36, endpoint=False)
    rays = _plane_rays(euclid, directions)

    def excess(index: int) -> tuple[float, float]:
        rng = np.random.default_rng([seed, index])
        a, b, c = (rays[k] for k in rng.choice(len(rays), size=3, replace=False))
        do = [d_o_metric(plane, o, u, v, 40).value for u, v in ((a, b), (b, c), (a, c))]
        doc = [d_oC_metric(plane, o, 1.0, u, v) for u, v in ((a, b), (b, c), (a, c))]
        return do[2] - do[0] - do[1], doc[2] - doc[0] - doc[1]

    results = run_concurrently(excess, list(range(triples)))
    cases.append(
        _at_most("do-triangle", max(r[0] for r in results), 3 * 2.0**-40, DERIVED)
    )
    cases.append(_at_most("doc-triangle", max(r[1] for r in results), 1e-9, DERIVED))
    report = check_quasisymmetry(
        plane,
        euclid,
        o,
        plane.point("P1", (0.2, 0.1)),
        1.0,
        2.0,
        [(math.cos(a), math.sin(a)) for a in directions[::4]],
    )
    cases.append(_at_most("scale-comparability", report.scale_excess, 1e-9, DERIVED))
    cases.append(_at_most("basepoint-comparability", report.basepoint_excess, 1e-9, DERIVED))
    return cases


def _sphere_params(count: int, p) -> list[tuple[float, float]]:
    params = []
    for k in range(count):
        angle = (k + 0.5) / count * math.pi / 2
        v = np.array([math.cos(angle), math.sin(angle)])
        a, b = v / lp_norm(v, p)
        params.append((float(a), float(b)))
    return params


def join_suite(seed: int, quick: bool) -> list[SuiteCase]:
    """Product rays over distinct unit parameters are pairwise divergent unit-speed rays."""
    count = 50 if not quick else 10
    line = _space("line")
    cases = []
    for p in (1.0, 2.0, P_INF):
        handle = BicombingHandle(line, p)
        o = line.point("R1", (0.0,))
        ray_x = TruncatedRay.from_direction(handle, o, (1.0,))
        ray_y = TruncatedRay.from_direction(handle, o, (1.0,))
        first = product_ray(ray_x, ray_y, 1.0, 0.0, p)
        space = first.space
        rays = [product_ray(ray_x, ray_y, a, b, p, space) for a, b in _sphere_params(count, p)]
        speed = max(ray_speed_error(ray, samples=8, span=10.0) for ray in rays)
        cases.append(_at_most(f"p{p_label(p)}-speed", speed, 1e-9, DERIVED))
        verdicts = [
            asymptotic_verdict(u, v, samples=8) for u, v in itertools.combinations(rays, 2)
        ]
        diverging = sum(v == AsymptoticVerdict.DIVERGENT for v in verdicts)
        cases.append(
            _holds(
                f"p{p_label(p)}-pairwise-divergent",
                diverging == len(verdicts),
                DERIVED,
                metric=float(diverging),
                detail=f"{diverging} of {len(verdicts)} pairs",
            )
        )
    return cases


def halfplane_suite(seed: int, quick: bool) -> list[SuiteCase]:
    report = halfplane_divergence_probe()
    return [
        _holds("cesaro-oscillation", report.oscillation >= 0.3, DERIVED, metric=report.oscillation),
        _holds(
            "recurring-gaps",
            report.non_cauchy,
            DERIVED,
            metric=float(len(report.gap_events)),
            detail=", ".join(f"{e.start}-{e.end}: {e.gap:.3f}" for e in report.gap_events),
        ),
        _at_most("product-identification", report.engine_max_error or 0.0, 1e-7, DERIVED),
    ]


ORACLE_SPACES: list[tuple[str, dict]] = [(name, {}) for name in LSP_NAMES] + [
    ("F", {}),
    ("F5", {}),
    ("square", {}),
    ("interval", {}),
    ("ck_patch", {"angle": 90, "depth": 1}),
]


def oracle_agreement_suite(seed: int, quick: bool) -> list[SuiteCase]:
    """Engine distances sit between the lattice oracle minus its error bound and the oracle.

    The reported metric is the worst (oracle - d) / (h max(d, h)), the per-space constant c.
    """
    pairs = _count(100, quick)
    h = DEFAULT_RESOLUTION
    cases = []
    for name, params in ORACLE_SPACES:
        space = _space(name, **params)
        sampler = PointSampler(space, seed, radius=1.5)
        dim = max(space.dim(c) for c in space.charts)
        for p in (2.0, P_INF):

            def check(index: int) -> tuple[bool, float]:
                x, y = sampler.points(index, 2)
                d = distance(space, x, y, p)
                oracle = grid_oracle_distance(space, x, y, p, h)
                crossings = max(len(geodesic(space, x, y, 2.0).chart_seq) - 1, 0)
                bound = oracle_error_bound(p, dim, d, h, max(crossings, 1))
                ok = d - 1e-9 * (1 + d) <= oracle <= d + bound
                return ok, (oracle - d) / (h * max(d, h))

            results = run_concurrently(check, list(range(pairs)))
            agreeing = sum(ok for ok, _ in results)
            cases.append(
                _holds(
                    f"{space.family}-p{p_label(p)}",
                    agreeing == pairs,
                    DERIVED,
                    metric=max(c for _, c in results),
                    detail=f"{agreeing} of {pairs} pairs within the bound",
                )
            )
    return cases


def midpoint_suite(seed: int, quick: bool) -> list[SuiteCase]:
    pairs = _count(100, quick)
    space = _space("lsp2")
    handle = BicombingHandle(space, P_INF, BicombingMethod.DIRECT_LP)
    sampler = PointSampler(space, seed)

    def run(index: int) -> tuple[float, float]:
        x, y = sampler.points(index, 2)
        forward, gaps = midpoint_trace(handle, x, y)
        backward, _ = midpoint_trace(handle, y, x)
        growth = max((b - a for a, b in zip(gaps, gaps[1:])), default=0.0)
        return handle.distance(forward, backward), growth

    results = run_concurrently(run, list(range(pairs)))
    cases = [
        _at_most("symmetric", max(r[0] for r in results), 1e-9, DERIVED),
        _at_most("monotone-contraction", max(r[1] for r in results), 1e-12, DERIVED),
    ]
    (report,) = check_axioms(
        reversibilize(handle), [Axiom.REVERSIBLE], sampler, AXIOM_TOL, pairs
    )
    cases.append(_at_most("reversibilized-reversible", report.max_violation, AXIOM_TOL, DERIVED))
    return cases


def coverage_suite(seed: int, quick: bool) -> list[SuiteCase]:
    samples = _count(200, quick)
    plane = _space("lsp1")
    handle = BicombingHandle(plane, 2.0)
    origin = plane.point("P1", (0.0, 0.0))
    sampler = PointSampler(plane, seed, radius=3.0)
    report = coverage_radius(plane, handle, origin, 4.0, sampler, samples=samples)
    cases = [_at_most("plane", report.radius, report.resolution, TRIVIAL)]
    for name, params in (("lsp2", {}), ("ck_patch", {"angle": 90, "depth": 2})):
        space = _space(name, **params)
        report = coverage_radius(
            space,
            BicombingHandle(space, 2.0),
            space.point("P1", (0.0, 0.0)),
            4.0,
            PointSampler(space, seed, radius=3.0),
            samples=samples,
        )
        cases.append(
            SuiteCase(
                id=space.family,
                status=CaseStatus.INFO,
                metric=report.radius,
                provenance=DERIVED,
                detail=f"{report.samples} samples, {report.rays} rays",
            )
        )
    return cases


SUITES: dict[str, Suite] = {
    "trajectory-equality": trajectory_equality_suite,
    "fxi-divergence": fxi_divergence_suite,
    "helly-gamma45": helly_suite,
    "axioms": axioms_suite,
    "ccc-implication": ccc_implication_suite,
    "projection": projection_suite,
    "boundary-metrics": boundary_metrics_suite,
    "join": join_suite,
    "halfplane": halfplane_suite,
    "oracle-agreement": oracle_agreement_suite,
    "midpoint": midpoint_suite,
    "coverage": coverage_suite,
}


# Published names that bundle several suites; "all" runs only the members.
SUITE_GROUPS: dict[str, tuple[str, ...]] = {
    "lemma5sp-trajectories": ("trajectory-equality", "fxi-divergence"),
}


def suite_names() -> list[str]:
    return sorted(SUITES) + sorted(SUITE_GROUPS) + ["all"]


def _run_prefixed(names: Sequence[str], seed: int, quick: bool) -> list[SuiteCase]:
    cases = []
    for suite_name in names:
        logger.info(f"Running suite {suite_name}")
        cases.extend(
            case.model_copy(update={"id": f"{suite_name}/{case.id}"})
            for case in SUITES[suite_name](seed, quick)
        )
    return cases


def run_suite(name: str, seed: int = default_seed, quick: bool = False) -> SuiteResult:
    """Runs one suite, a bundle, or every suite under "all" with suite-prefixed case ids."""
    if name != "all" and name not in SUITES and name not in SUITE_GROUPS:
        raise MalformedInputError(f"unknown suite {name!r}, expected one of {suite_names()}")
    started = time.perf_counter()
    if name == "all":
        cases = _run_prefixed(list(SUITES), seed, quick)
    elif name in SUITE_GROUPS:
        cases = _run_prefixed(SUITE_GROUPS[name], seed, quick)
    else:
        logger.info(f"Running suite {name}")
        cases = SUITES[name](seed, quick)
    result = SuiteResult(suite=name, cases=cases, seed=seed, elapsed=time.perf_counter() - started)
    failed = [case.id for case in cases if case.status == CaseStatus.FAIL]
    if failed:
        logger.warning(f"Suite {name} failed cases: {failed}")
    logger.info(f"Suite {name} finished in {result.elapsed:.1f}s with {len(cases)} cases")
    return result
