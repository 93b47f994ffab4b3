from typing import Annotated, Any, Literal

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    model_validator,
)
from pydantic.alias_generators import to_camel

from bicomb.custom_types import (
    Axiom,
    BicombingMethod,
    CaseStatus,
    ChartKind,
    DictWithStringKeys,
    PExponent,
    PSpecial,
    SpaceFamily,
    Vector,
)
from bicomb.env import certificate_tol, default_tol, max_chart_seq_len
from bicomb.lp_geometry import parse_p


def _dump_p(p: PExponent) -> str | float:
    return "inf" if p == PSpecial.INF else float(p)


PExponentField = Annotated[PExponent, BeforeValidator(parse_p), PlainSerializer(_dump_p)]
Bound = list[float | None]


class LabModel(BaseModel):
    model_config = ConfigDict(alias_generator=to_camel, populate_by_name=True)


class EngineOptions(LabModel):
    max_chart_seq_len: int = Field(default=max_chart_seq_len, ge=1)
    tol: float = Field(default=default_tol, gt=0)
    certificate_tol: float = Field(default=certificate_tol, gt=0)
    allow_chart_revisits: bool = False


class Chart(LabModel):
    id: str
    dim: int = Field(ge=1)
    kind: ChartKind
    bounds: list[Bound] | None = None

    @model_validator(mode="after")
    def check_kind(self) -> "Chart":
        if self.kind == ChartKind.PLANE and (self.dim != 2 or self.bounds is not None):
            raise ValueError(f"plane chart {self.id} must be unbounded and 2-dimensional")
        if self.kind == ChartKind.LINE and (self.dim != 1 or self.bounds is not None):
            raise ValueError(f"line chart {self.id} must be unbounded and 1-dimensional")
        if self.kind == ChartKind.INTERVAL:
            if self.bounds is None:
                self.bounds = [[0.0, 1.0]]
            if self.dim != 1 or self.bounds != [[0.0, 1.0]]:
                raise ValueError(f"interval chart {self.id} must be [0, 1]")
        if self.kind in (ChartKind.BOX, ChartKind.PRODUCT):
            if self.bounds is None or len(self.bounds) != self.dim:
                raise ValueError(f"chart {self.id} needs one bound pair per coordinate")
        if self.bounds is not None:
            for pair in self.bounds:
                if len(pair) != 2:
                    raise ValueError(f"chart {self.id} has a malformed bound {pair}")
                lo, hi = pair
                if lo is not None and hi is not None and lo >= hi:
                    raise ValueError(f"chart {self.id} has an empty bound {pair}")
            unbounded = any(lo is None or hi is None for lo, hi in self.bounds)
            if self.kind == ChartKind.BOX and unbounded:
                raise ValueError(f"box chart {self.id} must have finite bounds")
        return self


class GluingFlat(LabModel):
    basepoint: list[float]
    directions: list[list[float]] = Field(default_factory=list)


class GluingIdentification(LabModel):
    chart_a: str
    chart_b: str
    flat_a: GluingFlat
    flat_b: GluingFlat
    orientation: Literal[1, -1] = 1
    param_bounds: list[Bound] | None = None
    id: str | None = None

    @model_validator(mode="before")
    @classmethod
    def accept_line_form(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        for side in ("A", "B"):
            line = data.pop(f"line{side}", None)
            if line is not None:
                data[f"flat{side}"] = {
                    "basepoint": line["basepoint"],
                    "directions": [line["direction"]],
                }
        return data

    @property
    def label(self) -> str:
        return self.id or f"{self.chart_a}~{self.chart_b}"


class SpaceSpec(LabModel):
    family: SpaceFamily | None = None
    params: DictWithStringKeys = Field(default_factory=dict)
    charts: list[Chart] | None = None
    gluings: list[GluingIdentification] | None = None
    p: list[PExponentField] | None = None
    cubes: list[list[str]] | None = None
    declared_cat0: bool | None = None

    @model_validator(mode="after")
    def check_variant(self) -> "SpaceSpec":
        variants = [self.family is not None, self.charts is not None, self.cubes is not None]
        if sum(variants) != 1:
            raise ValueError("a space spec names exactly one of family, charts or cubes")
        return self


class SpacePoint(LabModel):
    model_config = ConfigDict(frozen=True)

    chart: str
    coords: tuple[float, ...]

    @property
    def vec(self) -> Vector:
        return np.asarray(self.coords, dtype=float)

    def __str__(self) -> str:
        return f"{self.chart}:" + ",".join(f"{c:.12g}" for c in self.coords)


class PathSegment(LabModel):
    chart: str
    start: tuple[float, ...]
    end: tuple[float, ...]


class PolyPath(LabModel):
    breakpoints: list[SpacePoint]
    chart_seq: list[str]
    segments: list[PathSegment]
    p: PExponentField
    method: BicombingMethod
    lengths: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_shape(self) -> "PolyPath":
        if len(self.chart_seq) != len(self.breakpoints) - 1:
            raise ValueError("chartSeq must have one entry per segment")
        if len(self.segments) != len(self.chart_seq):
            raise ValueError("segments and chartSeq disagree")
        return self


class AxiomReport(LabModel):
    axiom: Axiom
    samples: int
    seed: int
    max_violation: float = Field(ge=0)
    witness: DictWithStringKeys | None = None
    note: str | None = None
    reference_violation: float | None = None


class BoundaryMetricValue(LabModel):
    value: float
    truncation_bound: float = Field(ge=0)


class PointType(LabModel):
    n: int = Field(ge=0)
    m: int = Field(ge=0)


class ChartMap(LabModel):
    source: str
    target: str
    matrix: list[list[float]]
    offset: list[float]


class IsometrySpec(LabModel):
    name: str | None = None
    maps: list[ChartMap]


class DisplacementEstimate(LabModel):
    inf_estimate: float
    near_min_points: list[SpacePoint]
    samples: int


class LocalGeodesicVerdict(LabModel):
    ok: bool
    worst_excess: float
    witness: DictWithStringKeys | None = None


class PairwiseWitness(LabModel):
    i: int
    j: int
    distance: int
    bound: int


class Exclusion(LabModel):
    vertex: SpacePoint
    ball: int
    distance: int
    radius: int


class HellyCounterexample(LabModel):
    centers: list[SpacePoint]
    radii: list[int]
    pairwise: list[PairwiseWitness]
    exclusions: list[Exclusion]


class HellyVerdict(LabModel):
    status: Literal["pass", "counterexample"]
    families_checked: int
    counterexample: HellyCounterexample | None = None


class SuiteCase(LabModel):
    id: str
    status: CaseStatus
    metric: float | None = None
    tolerance: float | None = None
    provenance: str
    detail: str | None = None


class SuiteResult(LabModel):
    suite: str
    cases: list[SuiteCase]
    seed: int
    elapsed: float

    @property
    def passed(self) -> bool:
        return all(case.status != CaseStatus.FAIL for case in self.cases)


class CoverageReport(LabModel):
    radius: float
    resolution: float
    samples: int
    rays: int
    note: str | None = None


class GapEvent(LabModel):
    start: int
    end: int
    gap: float


class HalfplaneProbeReport(LabModel):
    oscillation: float
    gap_events: list[GapEvent]
    non_cauchy: bool
    threshold: float
    a: float
    n_max: int
    engine_max_error: float | None = None


class QuasisymmetryReport(LabModel):
    samples: int
    scale_excess: float
    basepoint_excess: float


class SpaceSummary(LabModel):
    family: str | None
    charts: int
    gluings: int
    dims: list[int]
    max_degree: int
    declared_p: list[PExponentField]
    bounded: bool
