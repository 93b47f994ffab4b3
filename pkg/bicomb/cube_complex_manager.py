import logging
import math
from functools import reduce
from typing import Sequence

import numpy as np

from bicomb.atlas_manager import ChartAtlas, lp_product
from bicomb.custom_types import ChartKind, PExponent
from bicomb.exceptions import InvalidComplexError
from bicomb.lp_geometry import lp_norm
from bicomb.models import Chart, GluingFlat, GluingIdentification, PointType, SpacePoint

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
INTERIOR_TOL = 1e-12
# ratio of consecutive block lengths in the half-plane sequence
CESARO_GROWTH = 8


def _corner(index: int, dim: int) -> list[float]:
    return [float((index >> j) & 1) for j in range(dim)]


def _face_of(indices: Sequence[int]) -> tuple[int, int] | None:
    """(fixed bits, free bit mask) when the vertex indices span a face, else None."""
    fixed = reduce(lambda a, b: a & b, indices)
    free = fixed ^ reduce(lambda a, b: a | b, indices)
    if len(set(indices)) != 1 << bin(free).count("1"):
        return None
    return fixed, free


class CubeComplex:
    """Maximal cubes given by vertex lists; vertex i of a d-cube sits at the corner spelled by i."""

    def __init__(self, cubes: Sequence[Sequence[str]], atlas: ChartAtlas, declared_cat0: bool):
        self.cubes = [tuple(cube) for cube in cubes]
        self.atlas = atlas
        self.declared_cat0 = declared_cat0
        self.chart_ids = list(atlas.charts)
        self.vertices = sorted({v for cube in self.cubes for v in cube})

    @property
    def dim(self) -> int:
        return max(self.cube_dim(cube) for cube in self.cubes)

    @staticmethod
    def cube_dim(cube: Sequence[str]) -> int:
        return len(cube).bit_length() - 1

    def cube(self, chart_id: str) -> tuple[str, ...]:
        return self.cubes[self.chart_ids.index(chart_id)]


def _maximal_cubes(cubes: list[tuple[str, ...]]) -> list[tuple[str, ...]]:
    kept = []
    for i, cube in enumerate(cubes):
        others = [other for j, other in enumerate(cubes) if j != i]
        if any(set(cube) == set(other) for other in others[:i]):
            continue
        covering = [other for other in others if set(cube) < set(other)]
        for other in covering:
            if _face_of([other.index(v) for v in cube]) is None:
                raise InvalidComplexError(
                    f"cube {list(cube)} sits inside {list(other)} but is not a face"
                )
        if not covering:
            kept.append(cube)
    return kept


def _face_gluing(
    first: tuple[str, ...], second: tuple[str, ...], id_a: str, id_b: str
) -> GluingIdentification | None:
    common = set(first) & set(second)
    if not common:
        return None
    dim_a = CubeComplex.cube_dim(first)
    dim_b = CubeComplex.cube_dim(second)
    face_a = _face_of([first.index(v) for v in common])
    face_b = _face_of([second.index(v) for v in common])
    if face_a is None or face_b is None:
        raise InvalidComplexError(
            f"cubes {id_a} and {id_b} overlap in {sorted(common)}, which is not a common face"
        )
    origin_a, free_a = face_a
    origin_b = second.index(first[origin_a])
    free_bits = [b for b in range(dim_a) if (free_a >> b) & 1]
    dirs_a, dirs_b, steps = [], [], []
    for bit in free_bits:
        neighbour = second.index(first[origin_a | (1 << bit)])
        step = neighbour ^ origin_b
        if step & (step - 1):
            raise InvalidComplexError(
                f"cubes {id_a} and {id_b} disagree on the edges of their face"
            )
        sign = 1.0 if neighbour & step else -1.0
        dirs_a.append([1.0 if j == bit else 0.0 for j in range(dim_a)])
        dirs_b.append([sign if (1 << j) == step else 0.0 for j in range(dim_b)])
        steps.append(np.array(dirs_b[-1]))
    base_b = np.array(_corner(origin_b, dim_b))
    for v in common:
        offsets = first.index(v) ^ origin_a
        predicted = base_b + sum(
            (steps[n] for n, bit in enumerate(free_bits) if (offsets >> bit) & 1),
            np.zeros(dim_b),
        )
        if not np.array_equal(predicted, np.array(_corner(second.index(v), dim_b))):
            raise InvalidComplexError(
                f"cubes {id_a} and {id_b} glue their common face inconsistently"
            )
    return GluingIdentification(
        chart_a=id_a,
        chart_b=id_b,
        flat_a=GluingFlat(basepoint=_corner(origin_a, dim_a), directions=dirs_a),
        flat_b=GluingFlat(basepoint=base_b.tolist(), directions=dirs_b),
        param_bounds=[[0.0, 1.0]] * len(free_bits),
        id=f"{id_a}~{id_b}",
    )


def build_cube_complex(
    cubes: Sequence[Sequence[str]],
    family: str | None = None,
    declared_cat0: bool = True,
    chart_prefix: str = "C",
) -> CubeComplex:
    """Validates a list of cubes and realizes it as unit box charts glued along common faces."""
    listed = [tuple(str(v) for v in cube) for cube in cubes]
    if not listed:
        raise InvalidComplexError("a cube complex needs at least one cube")
    for cube in listed:
        size = len(cube)
        if size < 2 or size & (size - 1):
            raise InvalidComplexError(f"cube {list(cube)} must list 2^d vertices with d >= 1")
        if len(set(cube)) != size:
            raise InvalidComplexError(f"cube {list(cube)} repeats a vertex")
    maximal = _maximal_cubes(listed)
    charts = []
    for n, cube in enumerate(maximal, start=1):
        dim = CubeComplex.cube_dim(cube)
        charts.append(
            Chart(
                id=f"{chart_prefix}{n}",
                dim=dim,
                kind=ChartKind.INTERVAL if dim == 1 else ChartKind.BOX,
                bounds=[[0.0, 1.0]] * dim,
            )
        )
    gluings = []
    for i, first in enumerate(maximal):
        for j in range(i + 1, len(maximal)):
            gluing = _face_gluing(first, maximal[j], charts[i].id, charts[j].id)
            if gluing is not None:
                gluings.append(gluing)
    atlas = ChartAtlas(charts, gluings, family=family, convex_charts=declared_cat0)
    logger.debug(f"Built cube complex {family or 'custom'} with {len(maximal)} maximal cubes")
    return CubeComplex(maximal, atlas, declared_cat0)


def complex_f() -> CubeComplex:
    return build_cube_complex([["c", "a", "b", "d"], ["c", "e"]], family="F")


def complex_f5() -> CubeComplex:
    squares = [["c", f"e{i}", f"e{(i + 1) % 5}", f"f{i}"] for i in range(5)]
    return build_cube_complex(squares, family="F5")


def unit_square() -> CubeComplex:
    return build_cube_complex([["v0", "v1", "v2", "v3"]], family="square")


def unit_interval() -> CubeComplex:
    return build_cube_complex([["v0", "v1"]], family="interval")


def subdivided_line(cells: int) -> CubeComplex:
    if cells < 1:
        raise InvalidComplexError("a subdivided line needs at least one cell")
    return build_cube_complex(
        [[f"v{i}", f"v{i + 1}"] for i in range(cells)],
        family=f"subdivided_line({cells})",
        chart_prefix="L",
    )


def n_chain(sequence: Sequence[float], length: int) -> CubeComplex:
    """Chain of unit intervals (entry 1) and squares crossed along a diagonal (entry sqrt 2)."""
    if length < 1 or len(sequence) < length:
        raise InvalidComplexError(f"n_chain needs at least {max(length, 1)} sequence entries")
    cubes = []
    for n, x in enumerate(sequence[:length]):
        if abs(x - 1.0) <= 1e-12:
            cubes.append([f"u{n}", f"u{n + 1}"])
        elif abs(x - SQRT2) <= 1e-12:
            cubes.append([f"u{n}", f"w{n}", f"w'{n}", f"u{n + 1}"])
        else:
            raise InvalidComplexError(f"n_chain entries must be 1 or sqrt(2), got {x}")
    return build_cube_complex(cubes, family=f"n_chain({length})")


def halfplane_complex(blocks: Sequence[float], line_cells: int, p: PExponent) -> ChartAtlas:
    """Finite patch of the product of a cube chain with a subdivided line."""
    chain = n_chain(blocks, len(blocks))
    return lp_product(chain.atlas, subdivided_line(line_cells).atlas, p)


def carrier_cube(cx: CubeComplex, x: SpacePoint) -> list[str]:
    """Vertices of the cube containing x in its interior."""
    cube = cx.cube(x.chart)
    coords = cx.atlas.point(x.chart, x.coords).coords
    dim = len(coords)
    members = []
    for index, vertex in enumerate(cube):
        corner = _corner(index, dim)
        if all(
            INTERIOR_TOL < c < 1 - INTERIOR_TOL or abs(c - corner[j]) <= INTERIOR_TOL
            for j, c in enumerate(coords)
        ):
            members.append(vertex)
    return sorted(members)


def point_type(cx: CubeComplex, x: SpacePoint) -> PointType:
    carrier = set(carrier_cube(cx, x))
    carrier_dim = len(carrier).bit_length() - 1
    star_dim = max(CubeComplex.cube_dim(cube) for cube in cx.cubes if carrier <= set(cube))
    return PointType(n=star_dim - carrier_dim, m=carrier_dim)


def face_distance_floor(cx: CubeComplex, x: SpacePoint, p: PExponent) -> float:
    """Distance from x to the nearest face avoiding x among the cubes that contain x."""
    floor = math.inf
    for twin in cx.atlas.equivalents(x):
        coords = twin.vec
        for j, c in enumerate(coords):
            for wall in (0.0, 1.0):
                if abs(c - wall) > INTERIOR_TOL:
                    step = np.zeros_like(coords)
                    step[j] = wall - c
                    floor = min(floor, lp_norm(step, p))
    return floor


def cesaro_block_sequence(n_max: int, growth: int = CESARO_GROWTH) -> list[float]:
    """x_1..x_n in blocks of 1's and sqrt(2)'s whose lengths grow geometrically.

    Block lengths are 1, growth, growth^2, ... and the values alternate, starting with 1,
    so the running means S_n / n keep oscillating.
    """
    if n_max < 1 or growth < 2:
        raise InvalidComplexError("the block sequence needs n_max >= 1 and growth >= 2")
    sequence: list[float] = []
    block, value = 1, 1.0
    while len(sequence) < n_max:
        sequence.extend([value] * min(block, n_max - len(sequence)))
        block *= growth
        value = SQRT2 if value == 1.0 else 1.0
    return sequence
