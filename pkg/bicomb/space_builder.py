import json
import logging
import math
from typing import Any, Callable

from pydantic import ValidationError

from bicomb.atlas_manager import ChartAtlas, build_ck_patch, build_lsp, lp_product
from bicomb.custom_types import ChartKind, DictWithStringKeys, SpaceFamily
from bicomb.cube_complex_manager import (
    CESARO_GROWTH,
    CubeComplex,
    build_cube_complex,
    cesaro_block_sequence,
    complex_f,
    complex_f5,
    halfplane_complex,
    n_chain,
    subdivided_line,
    unit_interval,
    unit_square,
)
from bicomb.exceptions import MalformedInputError, UnknownSpaceFamilyError
from bicomb.lp_geometry import parse_p
from bicomb.models import Chart, SpaceSpec

logger = logging.getLogger(__name__)

CUBE_FAMILIES: dict[SpaceFamily, Callable[[DictWithStringKeys], CubeComplex]] = {
    SpaceFamily.F: lambda params: complex_f(),
    SpaceFamily.F5: lambda params: complex_f5(),
    SpaceFamily.SQUARE: lambda params: unit_square(),
    SpaceFamily.INTERVAL: lambda params: unit_interval(),
    SpaceFamily.N_CHAIN: lambda params: n_chain(
        _blocks(_param(params, "sequence")), int(_param(params, "length"))
    ),
    SpaceFamily.SUBDIVIDED_LINE: lambda params: subdivided_line(int(_param(params, "cells", 2))),
}


def _param(params: DictWithStringKeys, name: str, default: Any = None) -> Any:
    if name in params:
        return params[name]
    if default is None:
        raise MalformedInputError(f"space parameter {name!r} is required")
    return default


def _block_value(entry: Any) -> float:
    if isinstance(entry, str):
        if entry.strip().lower() in ("sqrt2", "√2"):
            return math.sqrt(2.0)
        try:
            return float(entry)
        except ValueError as e:
            raise MalformedInputError(f"cannot read block entry {entry!r}") from e
    return float(entry)


def _blocks(entries: Any) -> list[float]:
    if not isinstance(entries, list) or not entries:
        raise MalformedInputError("block sequences are non-empty lists of 1 and sqrt2")
    return [_block_value(e) for e in entries]


def _line() -> ChartAtlas:
    return ChartAtlas(
        [Chart(id="R1", dim=1, kind=ChartKind.LINE)], [], family="line", convex_charts=True
    )


def _halfplane(params: DictWithStringKeys) -> ChartAtlas:
    if "blocks" in params:
        blocks = _blocks(params["blocks"])
    else:
        length = int(_param(params, "length", 4))
        blocks = cesaro_block_sequence(length, int(params.get("growth", CESARO_GROWTH)))
    cells = int(_param(params, "lineCells", 2))
    return halfplane_complex(blocks, cells, parse_p(params.get("p", "inf")))


def build_cube_space(spec: SpaceSpec) -> CubeComplex:
    """The cube complex behind a cube family or an explicit cube list."""
    if spec.cubes is not None:
        return build_cube_complex(spec.cubes, declared_cat0=bool(spec.declared_cat0))
    if spec.family not in CUBE_FAMILIES:
        raise MalformedInputError(f"{spec.family} is not a cube complex family")
    return CUBE_FAMILIES[spec.family](spec.params)


def build_space(spec: SpaceSpec) -> ChartAtlas:
    """Builds and validates the atlas a spec describes."""
    if spec.cubes is not None:
        return build_cube_space(spec).atlas
    if spec.charts is not None:
        return ChartAtlas(
            spec.charts,
            spec.gluings or [],
            declared_p=spec.p or (1.0, 2.0, "inf"),
            family="custom",
            convex_charts=bool(spec.declared_cat0),
        )
    family, params = spec.family, spec.params
    if family in CUBE_FAMILIES:
        atlas = CUBE_FAMILIES[family](params).atlas
    elif family.value.startswith("lsp"):
        atlas = build_lsp(int(family.value[3:]))
    elif family == SpaceFamily.CK_PATCH:
        atlas = build_ck_patch(
            int(_param(params, "angle")),
            int(_param(params, "depth")),
            params.get("offsets", (-1, 0, 1)),
        )
    elif family == SpaceFamily.HALFPLANE_COMPLEX:
        atlas = _halfplane(params)
    elif family == SpaceFamily.FXI:
        atlas = lp_product(complex_f().atlas, unit_interval().atlas, parse_p(params.get("p", 2)))
    elif family == SpaceFamily.LINE:
        atlas = _line()
    elif family == SpaceFamily.PRODUCT:
        first = build_space(_nested(_param(params, "first")))
        second = build_space(_nested(_param(params, "second")))
        atlas = lp_product(first, second, parse_p(_param(params, "p")))
    else:
        raise UnknownSpaceFamilyError(f"unknown space family {family}")
    logger.info(
        f"Built space {atlas.family}: {len(atlas.charts)} charts, {len(atlas.gluings)} gluings"
    )
    return atlas


def _nested(raw: Any) -> SpaceSpec:
    if isinstance(raw, SpaceSpec):
        return raw
    if isinstance(raw, str):
        return named_spec(raw)
    return spec_from_dict(raw)


def named_spec(name: str, params: DictWithStringKeys | None = None) -> SpaceSpec:
    return spec_from_dict({"family": name, "params": params or {}})


def spec_from_dict(raw: Any) -> SpaceSpec:
    if not isinstance(raw, dict):
        raise MalformedInputError("a space spec must be a JSON object")
    family = raw.get("family")
    if family is not None and family not in {f.value for f in SpaceFamily}:
        raise UnknownSpaceFamilyError(f"unknown space family {family!r}")
    try:
        return SpaceSpec.model_validate(raw)
    except ValidationError as e:
        raise MalformedInputError(f"malformed space spec: {e}") from e


def parse_space_spec(text: str) -> SpaceSpec:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedInputError(f"space spec is not valid JSON: {e}") from e
    return spec_from_dict(raw)


def emit_space_spec(spec: SpaceSpec) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    payload = spec.model_dump(mode="json", by_alias=True, exclude_none=True)
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def space_schema() -> str:
    schema = SpaceSpec.model_json_schema(by_alias=True)
    return json.dumps(schema, sort_keys=True, indent=2) + "\n"
