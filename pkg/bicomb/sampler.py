import logging
from typing import Sequence

import numpy as np

from bicomb.atlas_manager import ChartAtlas
from bicomb.env import default_seed
from bicomb.exceptions import MalformedInputError
from bicomb.models import SpacePoint

logger = logging.getLogger(__name__)


class PointSampler:
    """Seeded points of an atlas, drawn chart-uniformly inside bounds clipped to [-radius, radius].

    Every draw is keyed by an index so batches give the same points in any evaluation order.
    """

    def __init__(
        self,
        atlas: ChartAtlas,
        seed: int = default_seed,
        radius: float = 2.0,
        charts: Sequence[str] | None = None,
    ):
        if radius <= 0:
            raise MalformedInputError("sampling radius must be positive")
        self.atlas = atlas
        self.seed = seed
        self.radius = radius
        self.charts = list(charts) if charts is not None else list(atlas.charts)
        for chart_id in self.charts:
            atlas.chart(chart_id)
        if not self.charts:
            raise MalformedInputError("a sampler needs at least one chart")
        self._boxes = {}
        for chart_id in self.charts:
            lo, hi = atlas.chart_bounds(chart_id)
            self._boxes[chart_id] = (np.maximum(lo, -radius), np.minimum(hi, radius))

    def rng(self, index: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, index])

    def point(self, rng: np.random.Generator) -> SpacePoint:
        chart_id = self.charts[int(rng.integers(len(self.charts)))]
        lo, hi = self._boxes[chart_id]
        coords = rng.uniform(lo, hi)
        return self.atlas.canonicalize(self.atlas.point(chart_id, coords))

    def points(self, index: int, count: int) -> list[SpacePoint]:
        rng = self.rng(index)
        return [self.point(rng) for _ in range(count)]

    def times(self, index: int, count: int) -> list[float]:
        """Parameters in [0, 1] drawn from a stream separate from the points of the same index."""
        rng = np.random.default_rng([self.seed, index, 1])
        return sorted(float(t) for t in rng.uniform(0.0, 1.0, size=count))

    def __repr__(self) -> str:
        return f"PointSampler(seed={self.seed}, radius={self.radius}, charts={len(self.charts)})"
