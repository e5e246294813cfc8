"""Periodic structured grids and second-order finite-difference operators.

The spatial domain is a torus: a 1D circle or a 2D square with both axes
wrapped. Fields are cell-centered, cell i sitting at x_i = (i + 1/2) dx,
and all stencils use periodic index arithmetic, so every operator is total.
Integrals are midpoint sums, consistent in order with the stencils.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadP, DimMismatch, EmptyRegion, NonFinite

INF = math.inf


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with the same extent and cell count per axis."""

    dim: int
    extent: float
    cells: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DimMismatch(f"dim must be 1 or 2, got {self.dim}")
        if self.cells < 8:
            raise ValueError(f"need at least 8 cells per axis, got {self.cells}")
        if not self.extent > 0:
            raise ValueError(f"extent must be positive, got {self.extent}")

    @property
    def dx(self) -> float:
        return self.extent / self.cells

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    def axis_centers(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        return (np.arange(self.cells) + 0.5) * self.dx

    def coords(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinate arrays, broadcastable to the grid shape."""
        c = self.axis_centers()
        if self.dim == 1:
            return (c,)
        return tuple(np.meshgrid(c, c, indexing="ij", sparse=True))

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.dim, self.extent, self.cells * factor)


def _check_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise DimMismatch(f"values shape {values.shape} != grid shape {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise NonFinite("field contains NaN or Inf")
    return values


@dataclass(frozen=True)
class ScalarField:
    """One real value per cell; immutable once constructed."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = _check_values(self.grid, self.values)
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        """Sample fn(*coords) at cell centers."""
        vals = np.broadcast_to(fn(*grid.coords()), grid.shape)
        return cls(grid, np.array(vals, dtype=float))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def __add__(self, other: "ScalarField") -> "ScalarField":
        _same_grid(self, other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        _same_grid(self, other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * c)

    __rmul__ = __mul__

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class VectorField:
    """One scalar field per spatial axis."""

    grid: Grid
    components: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.components) != self.grid.dim:
            raise DimMismatch(
                f"{len(self.components)} components on a {self.grid.dim}D grid"
            )
        comps = tuple(_check_values(self.grid, c) for c in self.components)
        object.__setattr__(self, "components", comps)


def _same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise DimMismatch("fields live on different grids")


# Array kernels. The solver inner loop calls these directly on raw arrays;
# the ScalarField wrappers below are the public API.

def laplacian_values(values: np.ndarray, dx: float) -> np.ndarray:
    """Second-order periodic Laplacian of a raw value array."""
    out = np.zeros_like(values)
    for axis in range(values.ndim):
        out += np.roll(values, -1, axis) - 2.0 * values + np.roll(values, 1, axis)
    out /= dx * dx
    return out


def gradient_values(values: np.ndarray, dx: float) -> tuple[np.ndarray, ...]:
    """Second-order periodic central-difference gradient, one array per axis."""
    inv2dx = 0.5 / dx
    return tuple(
        (np.roll(values, -1, axis) - np.roll(values, 1, axis)) * inv2dx
        for axis in range(values.ndim)
    )


def laplacian(u: ScalarField) -> ScalarField:
    """Discrete Laplacian: 3-point stencil per axis, periodic wrap."""
    return ScalarField(u.grid, laplacian_values(u.values, u.grid.dx))


def gradient(u: ScalarField) -> VectorField:
    """Discrete gradient: central differences per axis, periodic wrap."""
    return VectorField(u.grid, gradient_values(u.values, u.grid.dx))


@dataclass(frozen=True)
class Region:
    """A subdomain given as a cell mask, with measure and boundary cells.

    Boundary cells are the masked cells having at least one periodic
    neighbor outside the mask.
    """

    grid: Grid
    mask: np.ndarray
    boundary: np.ndarray = field(init=False)

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != self.grid.shape:
            raise DimMismatch(f"mask shape {mask.shape} != grid shape {self.grid.shape}")
        mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)
        boundary = np.zeros_like(mask)
        for axis in range(mask.ndim):
            boundary |= mask & ~np.roll(mask, 1, axis)
            boundary |= mask & ~np.roll(mask, -1, axis)
        boundary.flags.writeable = False
        object.__setattr__(self, "boundary", boundary)

    @property
    def cell_count(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def measure(self) -> float:
        return self.cell_count * self.grid.cell_volume

    @property
    def boundary_count(self) -> int:
        return int(np.count_nonzero(self.boundary))

    def is_empty(self) -> bool:
        return self.cell_count == 0


def full_region(grid: Grid) -> Region:
    return Region(grid, np.ones(grid.shape, dtype=bool))


def interval(grid: Grid, center: float, measure: float) -> Region:
    """1D region: the run of cells of total length closest to `measure`,
    centered at `center` (periodic)."""
    if grid.dim != 1:
        raise DimMismatch("interval regions require a 1D grid")
    count = max(1, int(round(measure / grid.dx)))
    count = min(count, grid.cells)
    x = grid.axis_centers()
    dist = _periodic_distance(x, center, grid.extent)
    idx = np.argsort(dist, kind="stable")[:count]
    mask = np.zeros(grid.shape, dtype=bool)
    mask[idx] = True
    return Region(grid, mask)


def disk(grid: Grid, center: tuple[float, float], measure: float) -> Region:
    """2D region: lattice disk whose cell count best matches `measure`."""
    if grid.dim != 2:
        raise DimMismatch("disk regions require a 2D grid")
    target = max(1, int(round(measure / grid.cell_volume)))
    target = min(target, grid.cells ** 2)
    x, y = np.meshgrid(grid.axis_centers(), grid.axis_centers(), indexing="ij")
    d2 = (
        _periodic_distance(x, center[0], grid.extent) ** 2
        + _periodic_distance(y, center[1], grid.extent) ** 2
    )
    flat = np.argsort(d2, axis=None, kind="stable")[:target]
    mask = np.zeros(grid.cells ** 2, dtype=bool)
    mask[flat] = True
    return Region(grid, mask.reshape(grid.shape))


def rectangle(grid: Grid, center: tuple[float, float], measure: float) -> Region:
    """2D region: near-square block of cells with total area closest to `measure`."""
    if grid.dim != 2:
        raise DimMismatch("rectangle regions require a 2D grid")
    side = math.sqrt(measure)
    count = max(1, int(round(side / grid.dx)))
    count = min(count, grid.cells)
    masks = []
    for c in center:
        dist = _periodic_distance(grid.axis_centers(), c, grid.extent)
        idx = np.argsort(dist, kind="stable")[:count]
        m = np.zeros(grid.cells, dtype=bool)
        m[idx] = True
        masks.append(m)
    return Region(grid, np.outer(masks[0], masks[1]))


def _periodic_distance(x, center: float, extent: float):
    d = np.abs(x - center) % extent
    return np.minimum(d, extent - d)


def lp_norm(u: ScalarField, region: Region, p: float) -> float:
    """The L^p norm of u over the region, midpoint quadrature.

    p may be any real >= 1 or INF (max over the region).
    """
    _same_grid(u, region)
    if region.is_empty():
        raise EmptyRegion("lp_norm over an empty region")
    vals = np.abs(u.values[region.mask])
    if p == INF:
        return float(np.max(vals))
    if not p >= 1:
        raise BadP(f"p must be >= 1 or INF, got {p}")
    dv = u.grid.cell_volume
    if p == 1:
        return float(np.sum(vals) * dv)
    if p == 2:
        return float(math.sqrt(np.sum(vals * vals) * dv))
    return float((np.sum(vals ** p) * dv) ** (1.0 / p))
