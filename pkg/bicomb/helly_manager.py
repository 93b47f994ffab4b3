"""Integer grid graphs of l^inf plane patches and a brute-force Helly search.

Two lattice points of a plane are adjacent when |x1 - x2| <= 1 and |y1 - y2| <= 1 (king
moves), the standard l^inf lattice graph. Lattice points on a gluing line are merged into the
canonical point of the atlas, so a patch is a graph on the vertices only, with unit edges.
"""

import itertools
import logging
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from bicomb.atlas_manager import ChartAtlas, build_lsp
from bicomb.custom_types import ChartKind
from bicomb.exceptions import MalformedInputError, WindowTooSmallError
from bicomb.models import (
    Exclusion,
    HellyCounterexample,
    HellyVerdict,
    PairwiseWitness,
    SpacePoint,
)
from bicomb.utils import natural_key

logger = logging.getLogger(__name__)

KING_MOVES = [(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)]


@dataclass
class GridGraph:
    atlas: ChartAtlas
    half_width: int
    graph: nx.Graph = field(default_factory=nx.Graph)

    def vertex(self, chart_id: str, coords: tuple[int, int]) -> SpacePoint:
        point = self.atlas.canonicalize(self.atlas.point(chart_id, coords))
        if point not in self.graph:
            raise MalformedInputError(f"{point} is not a vertex of the grid window")
        return point

    def on_window_face(self, v: SpacePoint) -> bool:
        return any(
            np.max(np.abs(twin.vec)) >= self.half_width for twin in self.atlas.equivalents(v)
        )


def _vertex_key(v: SpacePoint) -> tuple:
    return natural_key(v.chart), v.coords


def _check_lattice_gluings(atlas: ChartAtlas) -> None:
    for gluing in atlas.gluings:
        for flat in (gluing.flat_a, gluing.flat_b):
            if len(flat.directions) != 1:
                raise MalformedInputError(f"grid patches glue along lines, not {gluing.label}")
            base = np.asarray(flat.basepoint)
            direction = np.asarray(flat.directions[0])
            if not np.array_equal(base, np.round(base)):
                raise MalformedInputError(f"gluing {gluing.label} misses the integer lattice")
            if not set(direction.tolist()) <= {-1.0, 0.0, 1.0}:
                raise MalformedInputError(
                    f"gluing {gluing.label} is neither axis-parallel nor diagonal"
                )


def build_grid_graph(atlas: ChartAtlas, half_width: int) -> GridGraph:
    """King-move graph on the lattice points of every plane inside [-w, w]^2."""
    if half_width < 1:
        raise MalformedInputError("grid windows need a half-width of at least 1")
    for chart in atlas.charts.values():
        if chart.kind != ChartKind.PLANE:
            raise MalformedInputError(f"grid patches are built from planes, {chart.id} is not")
    _check_lattice_gluings(atlas)
    g = GridGraph(atlas=atlas, half_width=half_width)
    span = range(-half_width, half_width + 1)
    for chart_id in atlas.charts:
        nodes = {
            (i, j): atlas.canonicalize(atlas.point(chart_id, (i, j))) for i in span for j in span
        }
        g.graph.add_nodes_from(nodes.values())
        for (i, j), node in nodes.items():
            for di, dj in KING_MOVES:
                neighbour = nodes.get((i + di, j + dj))
                if neighbour is not None:
                    g.graph.add_edge(node, neighbour)
    logger.info(
        f"Built grid patch of {atlas.family}: {g.graph.number_of_nodes()} vertices, "
        f"{g.graph.number_of_edges()} edges"
    )
    return g


def ball(g: GridGraph, v: SpacePoint, r: int) -> set[SpacePoint]:
    if r < 0:
        raise MalformedInputError("ball radii are non-negative integers")
    if v not in g.graph:
        raise MalformedInputError(f"{v} is not a vertex of the grid")
    return set(nx.single_source_shortest_path_length(g.graph, v, cutoff=r))


def pairwise_intersecting(g: GridGraph, centers: list[SpacePoint], radii: list[int]) -> bool:
    return all(w.distance <= w.bound for w in _pairwise_witnesses(g, centers, radii))


def _pairwise_witnesses(
    g: GridGraph, centers: list[SpacePoint], radii: list[int]
) -> list[PairwiseWitness]:
    witnesses = []
    for i, j in itertools.combinations(range(len(centers)), 2):
        d = nx.shortest_path_length(g.graph, centers[i], centers[j])
        witnesses.append(PairwiseWitness(i=i, j=j, distance=d, bound=radii[i] + radii[j]))
    return witnesses


def exclusion_certificate(
    g: GridGraph, centers: list[SpacePoint], radii: list[int]
) -> list[Exclusion]:
    """For every vertex of the first ball, a later ball that misses it."""
    lengths = [nx.single_source_shortest_path_length(g.graph, c) for c in centers]
    exclusions = []
    for v in sorted(ball(g, centers[0], radii[0]), key=_vertex_key):
        for k in range(1, len(centers)):
            d = lengths[k].get(v)
            if d is None or d > radii[k]:
                exclusions.append(
                    Exclusion(vertex=v, ball=k, distance=-1 if d is None else d, radius=radii[k])
                )
                break
        else:
            raise MalformedInputError(f"{v} lies in every ball, the intersection is not empty")
    return exclusions


def certificate_holds(g: GridGraph, found: HellyCounterexample) -> bool:
    """Recomputes a counterexample's certificates on g: every pair of balls meets, every vertex
    of the first ball is missed by the ball its exclusion names, and no vertex lies in all."""
    centers, radii = found.centers, found.radii
    for w in found.pairwise:
        d = nx.shortest_path_length(g.graph, centers[w.i], centers[w.j])
        if d != w.distance or d > radii[w.i] + radii[w.j]:
            return False
    if len(found.pairwise) != len(centers) * (len(centers) - 1) // 2:
        return False
    first = ball(g, centers[0], radii[0])
    if {e.vertex for e in found.exclusions} != first:
        return False
    for e in found.exclusions:
        if e.vertex in ball(g, centers[e.ball], radii[e.ball]):
            return False
    common = set(first)
    for v, r in zip(centers[1:], radii[1:]):
        common &= ball(g, v, r)
    return not common


def _boundary_distance(g: GridGraph) -> dict[SpacePoint, int]:
    faces = [v for v in g.graph if g.on_window_face(v)]
    return nx.multi_source_dijkstra_path_length(g.graph, faces)


def helly_check(
    g: GridGraph,
    max_radius: int,
    margin: int | None = None,
    family_size: int = 3,
    preferred: tuple[list[SpacePoint], list[int]] | None = None,
) -> HellyVerdict:
    """Searches families of up to family_size balls, pairwise intersecting but with empty total
    intersection, among centers at graph distance >= margin from the window faces.

    A preferred family is tried before the exhaustive search. Radius-0 balls are skipped, a
    pairwise intersecting family containing one always meets in its center.
    """
    margin = max_radius if margin is None else margin
    if max_radius < 1 or family_size < 2:
        raise MalformedInputError("helly checks need max_radius >= 1 and families of 2 or more")
    if margin < max_radius:
        raise MalformedInputError(f"margin {margin} must be at least max_radius {max_radius}")
    depth = _boundary_distance(g)
    centers = sorted((v for v, d in depth.items() if d >= margin), key=_vertex_key)
    if not centers:
        raise WindowTooSmallError(
            f"no vertex of the half-width {g.half_width} window is {margin} away from its faces"
        )
    admissible = set(centers)
    balls: dict[tuple[SpacePoint, int], frozenset[SpacePoint]] = {}

    def ball_of(v: SpacePoint, r: int) -> frozenset[SpacePoint]:
        if (v, r) not in balls:
            balls[(v, r)] = frozenset(ball(g, v, r))
        return balls[(v, r)]

    distances = {
        v: nx.single_source_shortest_path_length(g.graph, v, cutoff=2 * max_radius)
        for v in centers
    }

    def empty_family(family: tuple[SpacePoint, ...], radii: tuple[int, ...]) -> bool:
        for i, j in itertools.combinations(range(len(family)), 2):
            if distances[family[i]].get(family[j], 2 * max_radius + 1) > radii[i] + radii[j]:
                return False
        common = ball_of(family[0], radii[0])
        for v, r in zip(family[1:], radii[1:]):
            common = common & ball_of(v, r)
            if not common:
                return True
        return False

    checked = 0
    candidates = []
    if preferred is not None and set(preferred[0]) <= admissible:
        if max(preferred[1]) <= max_radius and len(preferred[0]) <= family_size:
            candidates.append((tuple(preferred[0]), [tuple(preferred[1])]))
    radii_range = range(1, max_radius + 1)
    for size in range(3, family_size + 1):
        for family in itertools.combinations(centers, size):
            candidates.append((family, itertools.product(radii_range, repeat=size)))
    for family, radii_options in candidates:
        for radii in radii_options:
            checked += 1
            if empty_family(family, radii):
                found = HellyCounterexample(
                    centers=list(family),
                    radii=list(radii),
                    pairwise=_pairwise_witnesses(g, list(family), list(radii)),
                    exclusions=exclusion_certificate(g, list(family), list(radii)),
                )
                logger.info(f"Helly counterexample after {checked} families: {found.centers}")
                return HellyVerdict(
                    status="counterexample", families_checked=checked, counterexample=found
                )
    logger.info(f"No Helly counterexample among {checked} families")
    return HellyVerdict(status="pass", families_checked=checked)


@dataclass(frozen=True)
class HellyPatch:
    lsp_index: int
    half_width: int
    witness: tuple[tuple[tuple[str, tuple[int, int]], ...], tuple[int, ...]] | None = None


# gamma45: two planes sharing the diagonal; gamma90: two planes sharing the x-axis.
PATCHES: dict[str, HellyPatch] = {
    "gamma45": HellyPatch(
        lsp_index=3,
        half_width=3,
        witness=((("P1", (-1, 0)), ("P1", (1, 2)), ("P2", (1, 0))), (1, 1, 1)),
    ),
    "gamma90": HellyPatch(lsp_index=2, half_width=5),
    "plane": HellyPatch(lsp_index=1, half_width=5),
}


def build_patch(name: str, half_width: int | None = None) -> GridGraph:
    if name not in PATCHES:
        raise MalformedInputError(f"unknown patch {name!r}, expected one of {sorted(PATCHES)}")
    patch = PATCHES[name]
    return build_grid_graph(build_lsp(patch.lsp_index), half_width or patch.half_width)


def patch_witness(name: str, g: GridGraph) -> tuple[list[SpacePoint], list[int]] | None:
    """The documented counterexample family of a patch, as grid vertices."""
    witness = PATCHES[name].witness
    if witness is None:
        return None
    points, radii = witness
    return [g.vertex(chart, coords) for chart, coords in points], list(radii)
