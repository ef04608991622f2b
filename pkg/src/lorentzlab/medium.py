"""Poisson scatterer field over the unbounded plane, sampled lazily.

The plane is tiled by square cells of side ``cell_size``.  The centers
inside a cell are a pure function of (seed, cell index): a Poisson count
with mean ``mu_eff * cell_size**2`` followed by i.i.d. uniform positions,
all drawn from a hash stream keyed by the cell.  Any spatial query can
therefore be answered by generating just the cells it touches, and two
queries always agree about the scatterers they both see.

Two intensity scalings are supported: the barrier model
``mu_eff = mu * epsilon**-delta`` and the slab model
``mu_eff = mu * epsilon**-1 * eta``.  ``epsilon`` here is the
interaction radius: the distance from a center at which a trajectory
collides.

``PlantedField`` provides the same query interface for an explicit list
of centers, for deterministic fixtures in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .rng import HashStream

__all__ = ["FieldSpec", "ScattererField", "PlantedField"]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class FieldSpec:
    """Parameters of one scatterer-field ensemble member.

    Exactly one of ``delta`` (barrier scaling) and ``eta`` (slab
    scaling) must be given.  ``cell_size`` defaults to ``4 * epsilon``
    and must be at least ``2 * epsilon`` so a disk touching a segment
    can only come from the segment's cell neighborhood.  ``y_period``
    (optional) wraps the realization periodically in y with a period of
    a whole number of cells.
    """

    mu: float
    epsilon: float
    seed: int
    delta: float | None = None
    eta: float | None = None
    cell_size: float | None = None
    y_period: float | None = None

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if (self.delta is None) == (self.eta is None):
            raise ValueError("exactly one of delta (barrier) or eta (slab) is required")
        if self.cell_size is None:
            object.__setattr__(self, "cell_size", 4.0 * self.epsilon)
        if self.cell_size < 2.0 * self.epsilon:
            raise ValueError(
                f"cell_size {self.cell_size} < 2*epsilon = {2 * self.epsilon}"
            )
        if self.y_period is not None:
            ncells = self.y_period / self.cell_size
            if abs(ncells - round(ncells)) > 1e-9 or round(ncells) < 1:
                raise ValueError("y_period must be a positive whole number of cells")

    @property
    def mu_eff(self) -> float:
        """Scatterer intensity actually realized (centers per unit area)."""
        if self.delta is not None:
            return self.mu * self.epsilon ** (-self.delta)
        return self.mu * self.eta / self.epsilon

    def with_seed(self, seed: int) -> "FieldSpec":
        return replace(self, seed=seed)


class ScattererField:
    """Lazy realization of a FieldSpec with per-cell memoization.

    Queries are pure functions of the spec, so concurrent use is safe;
    the cache only avoids re-deriving cells a trajectory revisits.
    """

    def __init__(self, spec: FieldSpec):
        self.spec = spec
        self.epsilon = spec.epsilon
        self.cell_size = spec.cell_size
        self._mean = spec.mu_eff * spec.cell_size**2
        self._ny = (
            int(round(spec.y_period / spec.cell_size))
            if spec.y_period is not None
            else 0
        )
        self._cache: dict[tuple[int, int], list[tuple[float, float]]] = {}

    def scatterers_in_cell(self, cell: tuple[int, int]) -> list[tuple[float, float]]:
        """Centers inside one lattice cell; identical lists on repeat calls."""
        got = self._cache.get(cell)
        if got is not None:
            return got
        ix, iy = cell
        if self._ny:
            base = iy % self._ny
            shift = (iy - base) * self.cell_size
            pts = self._generate(ix, base)
            pts = [(x, y + shift) for (x, y) in pts]
        else:
            pts = self._generate(ix, iy)
        self._cache[cell] = pts
        return pts

    def _generate(self, ix: int, iy: int) -> list[tuple[float, float]]:
        stream = HashStream(self.spec.seed, ix & _MASK64, iy & _MASK64)
        count = stream.poisson(self._mean)
        cs = self.cell_size
        return [
            ((ix + stream.uniform()) * cs, (iy + stream.uniform()) * cs)
            for _ in range(count)
        ]

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return math.floor(x / self.cell_size), math.floor(y / self.cell_size)

    def scatterers_near_segment(self, p0, p1) -> list[tuple[float, float]]:
        """Exactly the centers within ``epsilon`` of the closed segment.

        Enumerates the cells meeting the segment's epsilon-neighborhood
        and filters by exact point-segment distance; no duplicates.
        """
        x0, y0 = p0
        x1, y1 = p1
        if x0 == x1 and y0 == y1:
            raise ValueError("segment endpoints must differ")
        eps = self.epsilon
        cs = self.cell_size
        ix0 = math.floor((min(x0, x1) - eps) / cs)
        ix1 = math.floor((max(x0, x1) + eps) / cs)
        iy0 = math.floor((min(y0, y1) - eps) / cs)
        iy1 = math.floor((max(y0, y1) + eps) / cs)
        out: list[tuple[float, float]] = []
        r2 = eps * eps
        dx, dy = x1 - x0, y1 - y0
        seg2 = dx * dx + dy * dy
        for ix in range(ix0, ix1 + 1):
            for iy in range(iy0, iy1 + 1):
                for (cx, cy) in self.scatterers_in_cell((ix, iy)):
                    if _dist2_point_segment(cx, cy, x0, y0, dx, dy, seg2) <= r2:
                        out.append((cx, cy))
        return out


def _dist2_point_segment(px, py, x0, y0, dx, dy, seg2):
    """Squared distance from (px,py) to the closed segment (x0,y0)+(dx,dy)."""
    t = ((px - x0) * dx + (py - y0) * dy) / seg2
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    ex = px - (x0 + t * dx)
    ey = py - (y0 + t * dy)
    return ex * ex + ey * ey


class PlantedField:
    """Explicit finite center list behind the ScattererField interface."""

    def __init__(self, centers, epsilon: float, cell_size: float | None = None):
        self.centers = [(float(x), float(y)) for (x, y) in centers]
        self.epsilon = float(epsilon)
        self.cell_size = float(cell_size) if cell_size is not None else 4.0 * epsilon
        if self.cell_size < 2.0 * self.epsilon:
            raise ValueError("cell_size must be >= 2*epsilon")

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return math.floor(x / self.cell_size), math.floor(y / self.cell_size)

    def scatterers_in_cell(self, cell: tuple[int, int]) -> list[tuple[float, float]]:
        ix, iy = cell
        cs = self.cell_size
        return [
            (x, y)
            for (x, y) in self.centers
            if math.floor(x / cs) == ix and math.floor(y / cs) == iy
        ]

    def scatterers_near_segment(self, p0, p1) -> list[tuple[float, float]]:
        x0, y0 = p0
        x1, y1 = p1
        if x0 == x1 and y0 == y1:
            raise ValueError("segment endpoints must differ")
        dx, dy = x1 - x0, y1 - y0
        seg2 = dx * dx + dy * dy
        r2 = self.epsilon**2
        return [
            (cx, cy)
            for (cx, cy) in self.centers
            if _dist2_point_segment(cx, cy, x0, y0, dx, dy, seg2) <= r2
        ]
