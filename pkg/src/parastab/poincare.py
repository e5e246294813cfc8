"""Empirical study of a Poincare-type inequality on balls.

For smooth f and a bounded connected B the squared L^2 mass of f on B is
controlled by |B|^{2/n} times the Dirichlet energy plus |B|^{1/n} times a
boundary term: in 1D the boundary term is the single point value |f(x0)|^2
at a designated interior point, in 2D the midpoint sum of f^2 over the
boundary cells. The study measures, over random band-limited test
functions and a range of ball measures, the smallest constant making the
inequality hold, and checks that it is stable under rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, EmptyRegion, ZeroDenominator
from .grid import Grid, Region, ScalarField, disk, gradient_values, interval


@dataclass(frozen=True)
class PoincareResult:
    """Per-ball-measure worst ratios and the covering constant."""

    ball_measures: tuple[float, ...]
    ratios: tuple[float, ...]
    lambda0_estimate: float

    def __post_init__(self):
        if any(r <= 0 or not np.isfinite(r) for r in self.ratios):
            raise ValueError("ratios must be positive and finite")
        if any(r > self.lambda0_estimate * (1 + 1e-12) for r in self.ratios):
            raise ValueError("lambda0 estimate must dominate every ratio")


def _center_cell_1d(region: Region) -> int:
    """Middle cell of a connected 1D region, unwrapped across the seam."""
    idx = np.flatnonzero(region.mask)
    n = region.grid.cells
    if idx.size == n:
        return int(idx[idx.size // 2])
    # rotate so the run does not straddle the wrap point
    outside = np.flatnonzero(~region.mask)
    shift = int(outside[0])
    rolled = np.flatnonzero(np.roll(region.mask, -shift))
    mid = rolled[rolled.size // 2]
    return int((mid + shift) % n)


def poincare_ratio(f: ScalarField, B: Region, x0: float | None = None) -> float:
    """LHS / RHS of the inequality with unit constant.

    x0 (1D only) picks the boundary evaluation point; default is the ball
    center. Returns 0 for f identically zero on the closure of B.
    """
    if f.grid != B.grid:
        raise DimMismatch("field and region live on different grids")
    if B.is_empty():
        raise EmptyRegion("poincare_ratio over an empty region")
    grid = f.grid
    n = grid.dim
    dv = grid.cell_volume
    measure = B.measure
    lhs = float(np.sum(f.values[B.mask] ** 2)) * dv
    grad = gradient_values(f.values, grid.dx)
    dirichlet = float(sum(np.sum(g[B.mask] ** 2) for g in grad)) * dv
    if n == 1:
        if x0 is None:
            cell = _center_cell_1d(B)
        else:
            cell = int(np.argmin(np.abs(grid.axis_centers() - x0)))
            if not B.mask[cell]:
                raise EmptyRegion(f"x0={x0} does not fall inside the region")
        boundary = float(f.values[cell] ** 2)
    else:
        boundary = float(np.sum(f.values[B.boundary] ** 2)) * grid.dx
    denom = measure ** (2.0 / n) * dirichlet + measure ** (1.0 / n) * boundary
    if denom == 0.0:
        if lhs == 0.0:
            return 0.0
        raise ZeroDenominator("gradient and boundary terms vanish but the field does not")
    return lhs / denom


def _random_band_limited(rng: np.random.Generator, grid: Grid,
                         center, radius: float, max_modes: int = 8):
    """A random truncated Fourier series in ball-scaled coordinates, so the
    test family transforms covariantly under ball rescaling."""
    coords = grid.coords()
    if grid.dim == 1:
        s = (coords[0] - center[0]) / radius
        vals = np.full(grid.shape, rng.normal())
        for m in range(1, max_modes + 1):
            vals = vals + rng.normal() * np.cos(m * np.pi * s)
            vals = vals + rng.normal() * np.sin(m * np.pi * s)
    else:
        s1 = (coords[0] - center[0]) / radius
        s2 = (coords[1] - center[1]) / radius
        vals = np.full(grid.shape, rng.normal())
        for m in range(1, max_modes // 2 + 1):
            for l in range(1, max_modes // 2 + 1):
                vals = vals + rng.normal() * np.cos(m * np.pi * s1) * np.cos(l * np.pi * s2)
                vals = vals + rng.normal() * np.sin(m * np.pi * s1) * np.sin(l * np.pi * s2)
    return ScalarField(grid, vals)


def make_ball(grid: Grid, measure: float) -> Region:
    """A centered interval (1D) or lattice disk (2D) of the given measure."""
    center = grid.extent / 2.0
    if grid.dim == 1:
        return interval(grid, center, measure)
    return disk(grid, (center, center), measure)


def estimate_lambda0(
    n: int,
    ball_sizes: tuple[float, ...] = (0.05, 0.1, 0.2, 0.35, 0.5),
    test_functions: int = 40,
    seed: int = 0,
    grid: Grid | None = None,
) -> PoincareResult:
    """Max inequality ratio over random test functions and ball measures.

    Each test function index draws from its own seeded stream, so the sweep
    is deterministic regardless of evaluation order. Constant fields are
    always included alongside the random ones.
    """
    if grid is None:
        grid = Grid(n, 2.0, 512 if n == 1 else 128)
    if grid.dim != n:
        raise DimMismatch(f"grid dimension {grid.dim} != requested n={n}")
    center = (grid.extent / 2.0,) * n
    per_size = []
    for measure in ball_sizes:
        ball = make_ball(grid, measure)
        radius = measure / 2.0 if n == 1 else float(np.sqrt(measure / np.pi))
        worst = poincare_ratio(ScalarField.constant(grid, 1.0), ball)
        for k in range(test_functions):
            rng = np.random.default_rng((seed, k))
            fk = _random_band_limited(rng, grid, center, radius)
            worst = max(worst, poincare_ratio(fk, ball))
        per_size.append(worst)
    return PoincareResult(
        ball_measures=tuple(float(m) for m in ball_sizes),
        ratios=tuple(per_size),
        lambda0_estimate=max(per_size),
    )
