"""Brute-force distance oracle on per-chart h-lattices.

Every lattice path is a gluing path, so the oracle never undercuts the true distance. On the
way up it is bounded by the king-move distortion of the chart norm plus the cost of snapping
each crossing to the lattice: (kappa - 1) d + 2 h dim^(1/p) (crossings + 2) kappa, with kappa
from chamfer_distortion (1 for p in {1, inf}, about 1.0824 for p = 2 in the plane).
"""

import itertools
import logging
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from bicomb.atlas_manager import ChartAtlas, gluing_path_length
from bicomb.custom_types import PExponent, Vector
from bicomb.exceptions import MalformedInputError, WindowTooSmallError
from bicomb.geodesic_engine import build_problem, enumerate_routes, route_lower_bound
from bicomb.lp_geometry import chamfer_distortion, is_inf, lp_norm, lp_norms, parse_p
from bicomb.models import EngineOptions, SpacePoint

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 1.0 / 64.0
LATTICE_TOL = 1e-9
MAX_FLAT_NODES = 5_000_000


@dataclass
class ChartLattice:
    chart: str
    lo: np.ndarray
    shape: tuple[int, ...]
    offset: int
    open_lo: np.ndarray  # window faces cut inside the chart
    open_hi: np.ndarray

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def ids(self, idx: np.ndarray) -> np.ndarray:
        """Node ids for integer index rows, -1 where a row falls outside the window."""
        rel = np.atleast_2d(idx) - self.lo
        inside = np.all((rel >= 0) & (rel < np.asarray(self.shape)), axis=1)
        out = np.full(rel.shape[0], -1, dtype=np.int64)
        if np.any(inside):
            out[inside] = self.offset + np.ravel_multi_index(tuple(rel[inside].T), self.shape)
        return out

    def grid(self) -> np.ndarray:
        return np.indices(self.shape).reshape(len(self.shape), -1).T + self.lo


def oracle_error_bound(p: PExponent, dim: int, d: float, h: float, crossings: int) -> float:
    kappa = chamfer_distortion(p, dim)
    snap = h * (dim ** (0.0 if is_inf(p) else 1.0 / float(p)))
    return (kappa - 1.0) * d + 2.0 * snap * (crossings + 2) * kappa


def _on_lattice(values: Vector, h: float) -> np.ndarray | None:
    scaled = np.asarray(values, dtype=float) / h
    rounded = np.rint(scaled)
    if np.max(np.abs(scaled - rounded), initial=0.0) > LATTICE_TOL:
        return None
    return rounded.astype(np.int64)


def anchor_path_length(space: ChartAtlas, x: SpacePoint, y: SpacePoint, p: PExponent) -> float:
    """Length of a gluing path along a fewest-gluings chart route, crossing every flat at the
    point of parameter 0 (clipped to its range). An upper bound on d(x, y)."""
    simple = nx.Graph(space.graph)
    best = math.inf
    for start in space.charts_containing(x):
        for end in space.charts_containing(y):
            try:
                charts = nx.shortest_path(simple, start, end)
            except nx.NetworkXNoPath:
                continue
            pts = [x]
            for a, b in zip(charts, charts[1:]):
                sides = space.crossing(min(space.graph.get_edge_data(a, b)), a)
                u = np.clip(np.zeros(sides.dirs_from.shape[1]), sides.lower, sides.upper)
                pts.append(space.point(a, sides.base_from + sides.dirs_from @ u))
            pts.append(y)
            best = min(best, gluing_path_length(space, pts, charts, p))
    if math.isinf(best):
        raise WindowTooSmallError(f"no chart route joins {x} and {y}")
    return best


def _relevant_charts(
    atlas: ChartAtlas,
    x: SpacePoint,
    y: SpacePoint,
    p: PExponent,
    budget: float,
    opts: EngineOptions,
) -> list[str]:
    starts = {twin.chart: twin.vec for twin in atlas.equivalents(x)}
    ends = {twin.chart: twin.vec for twin in atlas.equivalents(y)}
    charts = set(starts) | set(ends)
    for route in enumerate_routes(atlas, list(starts), list(ends), opts):
        _, sides = build_problem(atlas, route, starts[route.charts[0]], ends[route.charts[-1]])
        if route_lower_bound(sides, starts[route.charts[0]], ends[route.charts[-1]], p) <= budget:
            charts.update(route.charts)
    return sorted(charts, key=list(atlas.charts).index)


def _chart_lattice(
    atlas: ChartAtlas, chart_id: str, anchors: list[Vector], margin: float, h: float, offset: int
) -> ChartLattice:
    c_lo, c_hi = atlas.chart_bounds(chart_id)
    dim = c_lo.size
    own = [a for a in anchors if a.size == dim] or [np.zeros(dim)]
    box_lo = np.min(own, axis=0) - margin
    box_hi = np.max(own, axis=0) + margin
    lo = np.maximum(c_lo, box_lo)
    hi = np.minimum(c_hi, box_hi)
    idx_lo = np.ceil(lo / h - LATTICE_TOL).astype(np.int64)
    idx_hi = np.floor(hi / h + LATTICE_TOL).astype(np.int64)
    if np.any(idx_hi < idx_lo):
        raise MalformedInputError(f"chart {chart_id} holds no lattice point at h={h}")
    return ChartLattice(
        chart=chart_id,
        lo=idx_lo,
        shape=tuple(int(n) for n in idx_hi - idx_lo + 1),
        offset=offset,
        open_lo=box_lo > c_lo,
        open_hi=box_hi < c_hi,
    )


def _chart_edges(lattice: ChartLattice, h: float, p: PExponent) -> tuple[Vector, Vector, Vector]:
    grid = lattice.grid()
    src = lattice.ids(grid)
    rows, cols, weights = [], [], []
    dim = grid.shape[1]
    for step in itertools.product((-1, 0, 1), repeat=dim):
        nonzero = [s for s in step if s]
        if not nonzero or nonzero[0] < 0:
            continue
        dst = lattice.ids(grid + np.asarray(step))
        keep = dst >= 0
        rows.append(src[keep])
        cols.append(dst[keep])
        weights.append(np.full(int(keep.sum()), h * lp_norm(step, p)))
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(weights)


def _unit_steps(dirs: Vector, label: str) -> tuple[np.ndarray, Vector]:
    scales = np.max(np.abs(dirs), axis=0) if dirs.size else np.zeros(0)
    steps = np.zeros(dirs.shape, dtype=np.int64)
    for j, scale in enumerate(scales):
        unit = _on_lattice(dirs[:, j] / scale, 1.0)
        if unit is None or np.any(np.abs(unit) > 1):
            raise MalformedInputError(f"gluing {label} is not aligned with the lattice")
        steps[:, j] = unit
    return steps, scales


def _flat_pairs(
    atlas: ChartAtlas, index: int, lattices: dict[str, ChartLattice], h: float
) -> tuple[np.ndarray, np.ndarray]:
    gluing = atlas.gluings[index]
    flat = atlas.flats[index]
    base_a, base_b = _on_lattice(flat.base_a, h), _on_lattice(flat.base_b, h)
    if base_a is None or base_b is None:
        raise MalformedInputError(f"gluing {gluing.label} is not aligned with the lattice")
    steps_a, scale_a = _unit_steps(flat.dirs_a, gluing.label)
    steps_b, scale_b = _unit_steps(flat.dirs_b, gluing.label)
    if not np.allclose(scale_a, scale_b, rtol=0.0, atol=LATTICE_TOL):
        raise MalformedInputError(f"gluing {gluing.label} is not aligned with the lattice")
    lat_a, lat_b = lattices[gluing.chart_a], lattices[gluing.chart_b]
    reach = max(max(lat_a.shape), max(lat_b.shape)) + int(np.max(np.abs(base_a), initial=0))
    ranges = []
    for j in range(flat.k):
        step = h / scale_a[j]
        lo = -reach if np.isinf(flat.lower[j]) else math.ceil(flat.lower[j] / step - LATTICE_TOL)
        hi = reach if np.isinf(flat.upper[j]) else math.floor(flat.upper[j] / step + LATTICE_TOL)
        ranges.append(np.arange(lo, hi + 1))
    count = math.prod(len(r) for r in ranges)
    if count > MAX_FLAT_NODES:
        raise MalformedInputError(f"gluing {gluing.label} needs {count} lattice nodes")
    params = (
        np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, flat.k)
        if flat.k
        else np.zeros((1, 0), dtype=np.int64)
    )
    ids_a = lat_a.ids(base_a + params @ steps_a.T)
    ids_b = lat_b.ids(base_b + params @ steps_b.T)
    keep = (ids_a >= 0) & (ids_b >= 0)
    return ids_a[keep], ids_b[keep]


def _attach(
    atlas: ChartAtlas, point: SpacePoint, lattices: dict[str, ChartLattice], h: float, p: PExponent
) -> list[tuple[int, float]]:
    """Lattice nodes around a point, with their chart distances to it."""
    links = []
    for twin in atlas.equivalents(point):
        lattice = lattices.get(twin.chart)
        if lattice is None:
            continue
        coords = twin.vec
        base = np.floor(coords / h + LATTICE_TOL).astype(np.int64)
        corners = base + np.array(list(itertools.product((0, 1), repeat=coords.size)))
        ids = lattice.ids(corners)
        gaps = lp_norms(corners * h - coords, p)
        links.extend((int(i), float(g)) for i, g in zip(ids, gaps) if i >= 0)
    if not links:
        raise WindowTooSmallError(f"no lattice node around {point}")
    return links


def _boundary_gap(
    atlas: ChartAtlas, point: SpacePoint, lattices: dict[str, ChartLattice], h: float
) -> float:
    gap = math.inf
    for twin in atlas.equivalents(point):
        lattice = lattices.get(twin.chart)
        if lattice is None:
            continue
        lo = lattice.lo * h
        hi = (lattice.lo + np.asarray(lattice.shape) - 1) * h
        for j, c in enumerate(twin.vec):
            if lattice.open_lo[j]:
                gap = min(gap, c - lo[j])
            if lattice.open_hi[j]:
                gap = min(gap, hi[j] - c)
    return gap


def grid_oracle_distance(
    space: ChartAtlas,
    x: SpacePoint,
    y: SpacePoint,
    p: PExponent,
    resolution: float = DEFAULT_RESOLUTION,
    upper: float | None = None,
    opts: EngineOptions | None = None,
) -> float:
    """Shortest-path length between x and y on the king-move h-lattices of the charts.

    Windows are the bounding box of the endpoints and gluing basepoints, widened by half the
    worst-case oracle length; raises WindowTooSmallError when an endpoint ends up closer to a
    cut window face than half the computed length. Without an explicit upper bound the
    windows are sized from anchor_path_length, never from an engine distance.
    """
    opts = opts or EngineOptions()
    p = parse_p(p)
    h = float(resolution)
    if h <= 0:
        raise MalformedInputError("resolution must be positive")
    if space.same_point(x, y):
        return 0.0
    estimate = anchor_path_length(space, x, y, p) if upper is None else float(upper)
    dim = max(chart.dim for chart in space.charts.values())
    ceiling = estimate + oracle_error_bound(p, dim, estimate, h, opts.max_chart_seq_len)
    charts = _relevant_charts(space, x, y, p, ceiling + opts.tol, opts)
    anchors = [twin.vec for twin in space.equivalents(x) + space.equivalents(y)]
    for index, gluing in enumerate(space.gluings):
        if gluing.chart_a in charts and gluing.chart_b in charts:
            anchors.extend([space.flats[index].base_a, space.flats[index].base_b])
    margin = ceiling / 2.0 + 2.0 * h
    lattices: dict[str, ChartLattice] = {}
    offset = 0
    for chart_id in charts:
        lattices[chart_id] = _chart_lattice(space, chart_id, anchors, margin, h, offset)
        offset += lattices[chart_id].size
    rows, cols, weights = [], [], []
    for lattice in lattices.values():
        r, c, w = _chart_edges(lattice, h, p)
        rows.append(r)
        cols.append(c)
        weights.append(w)
    glue_a, glue_b = [np.zeros(0, dtype=np.int64)], [np.zeros(0, dtype=np.int64)]
    for index, gluing in enumerate(space.gluings):
        if gluing.chart_a in lattices and gluing.chart_b in lattices:
            a, b = _flat_pairs(space, index, lattices, h)
            glue_a.append(a)
            glue_b.append(b)
    merge = coo_matrix(
        (np.ones(sum(a.size for a in glue_a)), (np.concatenate(glue_a), np.concatenate(glue_b))),
        shape=(offset, offset),
    )
    n_nodes, labels = connected_components(merge, directed=False)
    rows = [labels[r] for r in rows]
    cols = [labels[c] for c in cols]
    ends = []
    for point in (x, y):
        links = _attach(space, point, lattices, h, p)
        exact = [node for node, gap in links if gap <= 1e-15]
        if exact:
            ends.append(int(labels[exact[0]]))
            continue
        ends.append(n_nodes)
        rows.append(np.full(len(links), n_nodes, dtype=np.int64))
        cols.append(np.array([labels[node] for node, _ in links], dtype=np.int64))
        weights.append(np.array([gap for _, gap in links]))
        n_nodes += 1
    row = np.concatenate(rows)
    col = np.concatenate(cols)
    weight = np.concatenate(weights)
    graph = _dedupe(row, col, weight, n_nodes)
    source, target = ends
    lengths = dijkstra(graph, directed=False, indices=source, limit=2.0 * ceiling + 4.0 * h)
    value = float(lengths[target])
    if math.isinf(value):
        value = float(dijkstra(graph, directed=False, indices=source)[target])
    if math.isinf(value):
        raise WindowTooSmallError(f"the lattice windows do not connect {x} and {y}")
    gap = min(_boundary_gap(space, x, lattices, h), _boundary_gap(space, y, lattices, h))
    if gap < value / 2.0:
        raise WindowTooSmallError(
            f"an endpoint sits {gap:.3g} from a window face, "
            f"below half the oracle length {value:.6g}"
        )
    logger.debug(f"Grid oracle {x} -> {y} (p={p}, h={h}): {value:.12g} on {n_nodes} nodes")
    return value


def _dedupe(row: np.ndarray, col: np.ndarray, weight: np.ndarray, n_nodes: int) -> csr_matrix:
    """Undirected edge list with one entry per node pair, keeping the lightest weight."""
    lo, hi = np.minimum(row, col), np.maximum(row, col)
    keep = lo != hi
    lo, hi, weight = lo[keep], hi[keep], weight[keep]
    order = np.lexsort((weight, hi, lo))
    lo, hi, weight = lo[order], hi[order], weight[order]
    first = np.ones(lo.size, dtype=bool)
    first[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
    return csr_matrix((weight[first], (lo[first], hi[first])), shape=(n_nodes, n_nodes))
