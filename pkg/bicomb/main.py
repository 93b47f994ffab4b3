import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import click

from bicomb.atlas_manager import ChartAtlas, describe_space
from bicomb.bicombing_verifier import check_axioms, corrupt_handle, named_isometry
from bicomb.boundary_manager import (
    DEFAULT_HORIZON,
    Ray,
    TruncatedRay,
    asymptotic_verdict,
    coverage_radius,
    d_o_metric,
    d_oC_metric,
)
from bicomb.custom_types import Axiom, BicombingMethod, OutputFormat
from bicomb.env import default_seed, default_tol, log_level
from bicomb.exceptions import (
    BicombingLabError,
    ExportError,
    MalformedInputError,
    UnknownSpaceFamilyError,
)
from bicomb.export_accessor import (
    dump_json,
    export_path_csv,
    export_path_json,
    export_ray_csv,
    write_text_atomic,
)
from bicomb.geodesic_engine import BicombingHandle, distance, reversibilize
from bicomb.helly_manager import build_patch, helly_check, patch_witness
from bicomb.lp_geometry import p_label, parse_p
from bicomb.models import EngineOptions, SpacePoint, SpaceSpec
from bicomb.sampler import PointSampler
from bicomb.space_builder import (
    build_space,
    emit_space_spec,
    named_spec,
    parse_space_spec,
    space_schema,
)
from bicomb.suite_runner import run_suite, suite_names
from bicomb.utils import parse_point_arg

logging.basicConfig(level=log_level)
logger = logging.getLogger(__name__)


@dataclass
class LabOptions:
    tol: float
    seed: int
    out: Path | None
    fmt: OutputFormat | None = None

    def output_format(self) -> OutputFormat:
        """The explicit --format, else csv for a .csv destination, else json."""
        if self.fmt is not None:
            return self.fmt
        if self.out is not None and self.out.suffix.lower() == ".csv":
            return OutputFormat.CSV
        return OutputFormat.JSON


class LabGroup(click.Group):
    """Maps library errors to one-line diagnostics and exit codes."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except UnknownSpaceFamilyError as e:
            click.echo(f"unknown space family: {e}", err=True)
            ctx.exit(2)
        except MalformedInputError as e:
            click.echo(f"malformed input: {e}", err=True)
            ctx.exit(2)
        except ExportError as e:
            click.echo(f"i/o error: {e}", err=True)
            ctx.exit(2)
        except BicombingLabError as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(f"engine error: {e}", err=True)
            ctx.exit(1)


def _options(ctx: click.Context) -> LabOptions:
    return ctx.find_root().obj


def _emit(ctx: click.Context, payload: Any) -> None:
    opts = _options(ctx)
    text = dump_json(payload)
    if opts.out is not None:
        write_text_atomic(opts.out, text)
    click.echo(text, nl=False)


def _read_spec(path: str) -> SpaceSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ExportError(f"cannot read {path}: {e}") from e
    return parse_space_spec(text)


def _param_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _spec_from_args(space: str | None, spec: str | None, params: tuple[str, ...]) -> SpaceSpec:
    if (space is None) == (spec is None):
        raise click.UsageError("give exactly one of --space or --spec")
    if spec is not None:
        return _read_spec(spec)
    parsed = {}
    for item in params:
        key, sep, value = item.partition("=")
        if not sep:
            raise click.UsageError(f"--param {item!r} must look like key=value")
        parsed[key] = _param_value(value)
    return named_spec(space, parsed)


def _space(space: str | None, spec: str | None, params: tuple[str, ...]) -> ChartAtlas:
    return build_space(_spec_from_args(space, spec, params))


def _point(space: ChartAtlas, text: str) -> SpacePoint:
    try:
        chart, coords = parse_point_arg(text)
    except ValueError as e:
        raise MalformedInputError(str(e)) from e
    return space.point(chart, coords)


def _handle(ctx: click.Context, space: ChartAtlas, p: str, method: str) -> BicombingHandle:
    opts = EngineOptions(tol=_options(ctx).tol)
    return BicombingHandle(space, parse_p(p), BicombingMethod(method), opts)


def _ray(handle: BicombingHandle, o: SpacePoint, text: str, horizon: float) -> Ray:
    """A ray from o: dir:v1,v2 for a chart direction, else a point the ray stops at."""
    if text.startswith("dir:"):
        try:
            direction = [float(v) for v in text[4:].split(",")]
        except ValueError as e:
            raise MalformedInputError(f"cannot read direction {text!r}") from e
        return TruncatedRay.from_direction(handle, o, direction, horizon)
    return TruncatedRay.from_point(handle, o, _point(handle.atlas, text))


def _merge_option(ctx: click.Context, param: click.Parameter, value: Any) -> None:
    if value is None:
        return
    if param.name == "fmt":
        value = OutputFormat(value)
    setattr(_options(ctx), param.name, value)


def lab_options(fn):
    """The group's --tol, --seed, --out and --format, also accepted after the command."""
    formats = click.Choice([f.value for f in OutputFormat])
    for name, kwargs in [
        ("--format", {"type": formats, "help": "defaults to csv for a .csv --out"}),
        ("--out", {"type": click.Path(path_type=Path)}),
        ("--seed", {"type": int}),
        ("--tol", {"type": float}),
    ]:
        dest = "fmt" if name == "--format" else name[2:]
        fn = click.option(
            name, dest, default=None, expose_value=False, callback=_merge_option, **kwargs
        )(fn)
    return fn


def space_options(fn):
    fn = click.option("--param", "params", multiple=True, help="family parameter key=value")(fn)
    fn = click.option("--spec", type=click.Path(), help="JSON space spec file")(fn)
    fn = click.option("--space", help="built-in space family")(fn)
    return fn


def engine_options(fn):
    methods = [BicombingMethod.CAT0_TRAJECTORY.value, BicombingMethod.DIRECT_LP.value]
    fn = click.option(
        "--method", type=click.Choice(methods), default=BicombingMethod.CAT0_TRAJECTORY.value
    )(fn)
    fn = click.option("--p", "p", default="2", help="1, 2, a real >= 1, or inf")(fn)
    return fn


@click.group(cls=LabGroup)
@click.option("--tol", type=float, default=default_tol, show_default=True)
@click.option("--seed", type=int, default=default_seed, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.option(
    "--format",
    "fmt",
    type=click.Choice([f.value for f in OutputFormat]),
    default=None,
    help="defaults to csv for a .csv --out, else json",
)
@click.pass_context
def cli(ctx: click.Context, tol: float, seed: int, out: Path | None, fmt: str | None) -> None:
    """Glued l^p complexes, their bicombings and their boundaries."""
    ctx.obj = LabOptions(tol=tol, seed=seed, out=out, fmt=OutputFormat(fmt) if fmt else None)


@cli.group()
def space() -> None:
    """Build, validate and describe spaces."""


@space.command("build")
@lab_options
@space_options
@click.pass_context
def space_build(ctx, space, spec, params):
    spec_model = _spec_from_args(space, spec, params)
    build_space(spec_model)
    text = emit_space_spec(spec_model)
    if _options(ctx).out is not None:
        write_text_atomic(_options(ctx).out, text)
    click.echo(text, nl=False)


@space.command("validate")
@lab_options
@space_options
def space_validate(space, spec, params):
    atlas = _space(space, spec, params)
    click.echo(f"ok: {atlas.family} with {len(atlas.charts)} charts")


@space.command("describe")
@lab_options
@space_options
@click.pass_context
def space_describe(ctx, space, spec, params):
    _emit(ctx, describe_space(_space(space, spec, params)))


@space.command("schema")
@lab_options
def space_schema_command():
    click.echo(space_schema(), nl=False)


@cli.command()
@lab_options
@space_options
@engine_options
@click.option("--from", "start", required=True, help="CHART:x,y")
@click.option("--to", "end", required=True, help="CHART:x,y")
@click.pass_context
def geodesic(ctx, space, spec, params, p, method, start, end):
    """Canonical trajectory between two points; writes it to --out as CSV or JSON."""
    atlas = _space(space, spec, params)
    handle = _handle(ctx, atlas, p, method)
    path = handle.geodesic(_point(atlas, start), _point(atlas, end))
    opts = _options(ctx)
    if opts.out is not None:
        if opts.output_format() == OutputFormat.CSV:
            export_path_csv(path, opts.out)
        else:
            export_path_json(path, opts.out)
    click.echo(f"length {path.lengths[p_label(handle.p)]:.12g}")


@cli.command("distance")
@lab_options
@space_options
@click.option("--p", "p", default="2")
@click.option("--from", "start", required=True)
@click.option("--to", "end", required=True)
@click.pass_context
def distance_command(ctx, space, spec, params, p, start, end):
    atlas = _space(space, spec, params)
    opts = EngineOptions(tol=_options(ctx).tol)
    value = distance(atlas, _point(atlas, start), _point(atlas, end), parse_p(p), opts)
    click.echo(f"{value:.12g}")


@cli.group()
def bicombing() -> None:
    """Statistical checks of bicombing axioms."""


@bicombing.command("check")
@lab_options
@space_options
@engine_options
@click.option("--axioms", default="conical,consistent,convex,reversible")
@click.option("--samples", type=int, default=1000, show_default=True)
@click.option("--radius", type=float, default=2.0, show_default=True)
@click.option("--isometry", default=None, help="identity, translate:a,b or reflect:CHART")
@click.option("--corrupt", type=float, default=None, help="bump amplitude of a negative control")
@click.option("--check-tol", type=float, default=1e-7, show_default=True)
@click.pass_context
def bicombing_check(
    ctx, space, spec, params, p, method, axioms, samples, radius, isometry, corrupt, check_tol
):
    """Prints one report per axiom; exits 1 when a violation exceeds the check tolerance."""
    atlas = _space(space, spec, params)
    handle = _handle(ctx, atlas, p, method)
    if corrupt is not None:
        handle = corrupt_handle(handle, corrupt)
    try:
        wanted = [Axiom(name.strip()) for name in axioms.split(",") if name.strip()]
    except ValueError as e:
        raise click.UsageError(str(e)) from e
    g = named_isometry(atlas, isometry) if isometry else None
    sampler = PointSampler(atlas, _options(ctx).seed, radius)
    reports = check_axioms(handle, wanted, sampler, check_tol, samples, g)
    _emit(ctx, reports)
    if any(r.max_violation > check_tol for r in reports):
        ctx.exit(1)


@bicombing.command("reversibilize")
@lab_options
@space_options
@engine_options
@click.option("--from", "start", required=True)
@click.option("--to", "end", required=True)
@click.option("--t", "t", type=float, required=True)
@click.pass_context
def bicombing_reversibilize(ctx, space, spec, params, p, method, start, end, t):
    """Evaluates the midpoint-reversibilized handle at (x, y, t)."""
    atlas = _space(space, spec, params)
    handle = reversibilize(_handle(ctx, atlas, p, method), _options(ctx).tol)
    click.echo(dump_json(handle.eval(_point(atlas, start), _point(atlas, end), t)), nl=False)


@cli.group()
def boundary() -> None:
    """Boundary metrics of truncated rays. Rays are dir:v1,v2 or a point to stop at."""


def boundary_options(fn):
    fn = click.option("--horizon", type=float, default=DEFAULT_HORIZON, show_default=True)(fn)
    fn = click.option("--ray2", required=True)(fn)
    fn = click.option("--ray1", required=True)(fn)
    fn = click.option("--o", "base", required=True, help="basepoint CHART:x,y")(fn)
    return fn


@boundary.command("do")
@lab_options
@space_options
@engine_options
@boundary_options
@click.option("--terms", type=int, default=40, show_default=True)
@click.pass_context
def boundary_do(ctx, space, spec, params, p, method, base, ray1, ray2, horizon, terms):
    atlas = _space(space, spec, params)
    handle = _handle(ctx, atlas, p, method)
    o = _point(atlas, base)
    rays = [_ray(handle, o, text, horizon) for text in (ray1, ray2)]
    _emit(ctx, d_o_metric(atlas, o, rays[0], rays[1], terms))


@boundary.command("doc")
@lab_options
@space_options
@engine_options
@boundary_options
@click.option("--c", "c", type=float, default=1.0, show_default=True)
@click.pass_context
def boundary_doc(ctx, space, spec, params, p, method, base, ray1, ray2, horizon, c):
    atlas = _space(space, spec, params)
    handle = _handle(ctx, atlas, p, method)
    o = _point(atlas, base)
    rays = [_ray(handle, o, text, horizon) for text in (ray1, ray2)]
    click.echo(f"{d_oC_metric(atlas, o, c, rays[0], rays[1]):.12g}")


@boundary.command("asymptotic")
@lab_options
@space_options
@engine_options
@boundary_options
@click.option("--bound", type=float, default=None)
@click.pass_context
def boundary_asymptotic(ctx, space, spec, params, p, method, base, ray1, ray2, horizon, bound):
    atlas = _space(space, spec, params)
    handle = _handle(ctx, atlas, p, method)
    o = _point(atlas, base)
    rays = [_ray(handle, o, text, horizon) for text in (ray1, ray2)]
    if _options(ctx).out is not None and _options(ctx).output_format() == OutputFormat.CSV:
        export_ray_csv(rays[0], _options(ctx).out)
    click.echo(asymptotic_verdict(rays[0], rays[1], bound).value)


@boundary.command("coverage")
@lab_options
@space_options
@engine_options
@click.option("--o", "base", required=True)
@click.option("--radius", type=float, required=True)
@click.option("--rays", type=int, default=64, show_default=True)
@click.option("--samples", type=int, default=200, show_default=True)
@click.pass_context
def boundary_coverage(ctx, space, spec, params, p, method, base, radius, rays, samples):
    atlas = _space(space, spec, params)
    handle = _handle(ctx, atlas, p, method)
    sampler = PointSampler(atlas, _options(ctx).seed, radius)
    _emit(ctx, coverage_radius(atlas, handle, _point(atlas, base), radius, sampler, rays, samples))


@cli.command()
@lab_options
@click.option("--patch", required=True, help="gamma45, gamma90 or plane")
@click.option("--max-radius", type=int, required=True)
@click.option("--margin", type=int, default=None)
@click.option("--family-size", type=int, default=3, show_default=True)
@click.option("--half-width", type=int, default=None)
@click.pass_context
def helly(ctx, patch, max_radius, margin, family_size, half_width):
    """Brute-force Helly search; exits 1 when a counterexample is found."""
    g = build_patch(patch, half_width)
    verdict = helly_check(g, max_radius, margin, family_size, patch_witness(patch, g))
    _emit(ctx, verdict)
    if verdict.status == "counterexample":
        ctx.exit(1)


@cli.group()
def suite() -> None:
    """Deterministic property suites."""


@suite.command("run")
@lab_options
@click.option("--name", required=True, type=click.Choice(suite_names()))
@click.option("--quick", is_flag=True, help="a tenth of the samples")
@click.pass_context
def suite_run(ctx, name, quick):
    result = run_suite(name, _options(ctx).seed, quick)
    _emit(ctx, result)
    if not result.passed:
        ctx.exit(1)
