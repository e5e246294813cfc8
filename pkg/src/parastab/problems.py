"""Coefficient bundles for quasilinear parabolic problems.

A problem is u_t = a(t,x,u,q) Lap(u) + div_x f(t,x,u) + f_u . grad(u)
+ h(t,x,u,q) with q standing for grad(u) and initial data u(0,.) = phi.
The bundle carries the analytic partial derivatives needed to assemble
linearized equations, plus hypothesis metadata: ellipticity bounds on a,
sampled coefficient-regularity constants, and measured solution bounds.

Coefficient callables are vectorized: t is a scalar or array, x and q are
tuples of per-axis arrays, u is an array; results broadcast against u.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .errors import HypothesisViolation, NonFinite
from .grid import Grid, Region, gradient_values

Coeff = Callable[..., np.ndarray]


@dataclass(frozen=True)
class CoefficientSet:
    """Diffusion a, flux f, source h, and their partial derivatives.

    Signatures: a, a_u, a_q, h, h_u, h_q take (t, x, u, q); the flux family
    f, f_u, f_uu, div_x_f, div_x_f_u takes (t, x, u). Vector-valued entries
    (a_q, f, f_u, f_uu, h_q) return one array per axis. div_x_f is the
    scalar sum of the explicit-in-x derivatives of the flux components;
    div_x_f_u the same for the flux u-derivatives.
    """

    dim: int
    a: Coeff
    a_u: Coeff
    a_q: Coeff
    f: Coeff
    f_u: Coeff
    f_uu: Coeff
    div_x_f: Coeff
    div_x_f_u: Coeff
    h: Coeff
    h_u: Coeff
    h_q: Coeff
    zero_flux: bool = False
    zero_source: bool = False


@dataclass(frozen=True)
class FieldBounds:
    """Ellipticity bounds, coefficient-regularity constants, and measured
    solution bounds (sup of |u|, of its first and of its second discrete
    derivatives over a trajectory)."""

    a_star: float
    a_sup: float
    k1: float
    k2: float
    k3: float
    K1: float = 0.0
    K2: float = 0.0
    K3: float = 0.0

    def __post_init__(self):
        if not (0 < self.a_star <= self.a_sup):
            raise HypothesisViolation(
                f"need 0 < a_star <= a_sup, got [{self.a_star}, {self.a_sup}]"
            )
        if min(self.k1, self.k2, self.k3) <= 0:
            raise HypothesisViolation("regularity constants k1, k2, k3 must be positive")
        ks = (self.K1, self.K2, self.K3)
        if any(k < 0 or not np.isfinite(k) for k in ks):
            raise HypothesisViolation("measured bounds must be finite and nonnegative")


@dataclass(frozen=True)
class ParabolicProblem:
    """A coefficient bundle with initial data and hypothesis metadata.

    u_box and q_box are the half-widths of the state box on which the
    hypothesis self-tests sample the coefficients (and on which a_sup for
    state-dependent diffusion was declared).
    """

    coeffs: CoefficientSet
    initial: Callable[..., np.ndarray]
    bounds: FieldBounds
    u_box: float
    q_box: float
    label: str = ""

    def initial_values(self, grid: Grid) -> np.ndarray:
        vals = np.broadcast_to(np.asarray(self.initial(*grid.coords()), float), grid.shape)
        if not np.all(np.isfinite(vals)):
            raise NonFinite(f"initial data of {self.label or 'problem'} is not finite")
        return np.array(vals)


@dataclass(frozen=True)
class SampleBox:
    """A box [t0,t1] x E x [u0,u1] (x [q0,q1]^dim when gradient values
    participate) over which coefficient sup-norms are sampled."""

    t_range: tuple[float, float]
    region: Region
    u_range: tuple[float, float]
    q_range: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.t_range[1] < self.t_range[0] or self.u_range[1] < self.u_range[0]:
            raise ValueError("sample box ranges must be nonempty")
        if self.q_range is not None and self.q_range[1] < self.q_range[0]:
            raise ValueError("sample box q range must be nonempty")


@dataclass(frozen=True)
class CoeffDiffs:
    """The four sup-norm coefficient differences driving the stability bound."""

    a: float
    div_f: float
    f_u: float
    h: float

    @property
    def total(self) -> float:
        return self.a + self.div_f + self.f_u + self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a, self.div_f, self.f_u, self.h)


def second_derivative_sup(values: np.ndarray, dx: float) -> float:
    """Max over i,j of the sup of the discrete second derivative d2/dxi dxj."""
    sup = 0.0
    for axis in range(values.ndim):
        dd = np.roll(values, -1, axis) - 2.0 * values + np.roll(values, 1, axis)
        sup = max(sup, float(np.max(np.abs(dd))) / (dx * dx))
    if values.ndim == 2:
        gx = gradient_values(values, dx)[0]
        mixed = gradient_values(gx, dx)[1]
        sup = max(sup, float(np.max(np.abs(mixed))))
    return sup


def measure_bounds(problem: ParabolicProblem, trajectory) -> FieldBounds:
    """Fill the measured K bounds from a solved trajectory's snapshots."""
    values = trajectory.values
    if not np.all(np.isfinite(values)):
        raise NonFinite("trajectory contains NaN or Inf")
    dx = trajectory.grid.dx
    K1 = float(np.max(np.abs(values)))
    K2 = 0.0
    K3 = 0.0
    for snap in values:
        for g in gradient_values(snap, dx):
            K2 = max(K2, float(np.max(np.abs(g))))
        K3 = max(K3, second_derivative_sup(snap, dx))
    return dataclasses.replace(problem.bounds, K1=K1, K2=K2, K3=K3)


def build_sample_boxes(T: float, region: Region, K1: float, K2: float) -> tuple[SampleBox, SampleBox]:
    """The two boxes of the stability theorem: the flux terms are sampled on
    the box without gradient values, the diffusion and source terms on the
    box that includes them."""
    flux_box = SampleBox((0.0, T), region, (-K1, K1))
    grad_box = SampleBox((0.0, T), region, (-K1, K1), (-K2, K2))
    return flux_box, grad_box


def _box_samples(box: SampleBox, samples: int):
    """Deterministic low-discrepancy samples of a box.

    Spatial positions are drawn per cell of the region plus a sub-cell
    offset, so the samples cover exactly the region's cells.
    """
    grid = box.region.grid
    dim = grid.dim
    ndim = 1 + dim + 2 + (dim if box.q_range is not None else 0)
    h = qmc.Halton(d=ndim, scramble=False).random(samples)
    cells = np.flatnonzero(box.region.mask.ravel())
    pick = cells[np.minimum((h[:, 0] * cells.size).astype(int), cells.size - 1)]
    idx = np.unravel_index(pick, grid.shape)
    x = tuple(
        (idx[ax] + 0.5) * grid.dx + (h[:, 1 + ax] - 0.5) * grid.dx
        for ax in range(dim)
    )
    t0, t1 = box.t_range
    t = t0 + (t1 - t0) * h[:, 1 + dim]
    u0, u1 = box.u_range
    u = u0 + (u1 - u0) * h[:, 2 + dim]
    q = None
    if box.q_range is not None:
        q0, q1 = box.q_range
        q = tuple(q0 + (q1 - q0) * h[:, 3 + dim + ax] for ax in range(dim))
    return t, x, u, q


def sup_coeff_diffs(
    P: ParabolicProblem,
    Q: ParabolicProblem,
    flux_box: SampleBox,
    grad_box: SampleBox,
    samples: int = 4096,
) -> CoeffDiffs:
    """Sampled sup norms of a-b, div_x f - div_x g, f_u - g_u (component
    max-norm) and h-k over the hypothesis boxes."""
    if samples < 1000:
        raise ValueError("need at least 1000 samples for a sup estimate")
    t, x, u, q = _box_samples(grad_box, samples)
    diff_a = float(np.max(np.abs(P.coeffs.a(t, x, u, q) - Q.coeffs.a(t, x, u, q))))
    diff_h = float(np.max(np.abs(P.coeffs.h(t, x, u, q) - Q.coeffs.h(t, x, u, q))))
    t, x, u, _ = _box_samples(flux_box, samples)
    diff_divf = float(np.max(np.abs(P.coeffs.div_x_f(t, x, u) - Q.coeffs.div_x_f(t, x, u))))
    fu_p = P.coeffs.f_u(t, x, u)
    fu_q = Q.coeffs.f_u(t, x, u)
    diff_fu = max(
        float(np.max(np.abs(np.asarray(cp, float) - np.asarray(cq, float))))
        for cp, cq in zip(fu_p, fu_q)
    )
    out = CoeffDiffs(diff_a, diff_divf, diff_fu, diff_h)
    if not all(np.isfinite(v) for v in out.as_tuple()):
        raise NonFinite("coefficient difference sampling produced non-finite values")
    return out


# Hypothesis self-tests.

_REL_TOL = 1e-5
_FD_STEP = 1e-5


def _rel_err(analytic, numeric) -> float:
    analytic = np.asarray(analytic, float)
    numeric = np.asarray(numeric, float)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-3)
    return float(np.max(np.abs(analytic - numeric) / scale))


def check_derivatives(
    problem: ParabolicProblem,
    T: float = 1.0,
    n_points: int = 100,
    seed: int = 0,
) -> float:
    """Compare every analytic partial against central finite differences at
    random points of the hypothesis box; returns the worst relative error
    and raises HypothesisViolation above the tolerance."""
    c = problem.coeffs
    dim = c.dim
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, T, n_points)
    x = tuple(rng.uniform(0.0, 1.0, n_points) for _ in range(dim))
    u = rng.uniform(-problem.u_box, problem.u_box, n_points)
    q = tuple(rng.uniform(-problem.q_box, problem.q_box, n_points) for _ in range(dim))
    e = _FD_STEP
    worst = 0.0

    def bump(arrs, ax, delta):
        return tuple(a + delta if i == ax else a for i, a in enumerate(arrs))

    worst = max(worst, _rel_err(c.a_u(t, x, u, q), (c.a(t, x, u + e, q) - c.a(t, x, u - e, q)) / (2 * e)))
    worst = max(worst, _rel_err(c.h_u(t, x, u, q), (c.h(t, x, u + e, q) - c.h(t, x, u - e, q)) / (2 * e)))
    aq = c.a_q(t, x, u, q)
    hq = c.h_q(t, x, u, q)
    for ax in range(dim):
        qp, qm = bump(q, ax, e), bump(q, ax, -e)
        worst = max(worst, _rel_err(aq[ax], (c.a(t, x, u, qp) - c.a(t, x, u, qm)) / (2 * e)))
        worst = max(worst, _rel_err(hq[ax], (c.h(t, x, u, qp) - c.h(t, x, u, qm)) / (2 * e)))
    fu = c.f_u(t, x, u)
    fuu = c.f_uu(t, x, u)
    fp, fm = c.f(t, x, u + e), c.f(t, x, u - e)
    fup, fum = c.f_u(t, x, u + e), c.f_u(t, x, u - e)
    for ax in range(dim):
        worst = max(worst, _rel_err(fu[ax], (fp[ax] - fm[ax]) / (2 * e)))
        worst = max(worst, _rel_err(fuu[ax], (fup[ax] - fum[ax]) / (2 * e)))
    divf = sum((c.f(t, bump(x, ax, e), u)[ax] - c.f(t, bump(x, ax, -e), u)[ax]) / (2 * e) for ax in range(dim))
    worst = max(worst, _rel_err(c.div_x_f(t, x, u), divf))
    divfu = sum((c.f_u(t, bump(x, ax, e), u)[ax] - c.f_u(t, bump(x, ax, -e), u)[ax]) / (2 * e) for ax in range(dim))
    worst = max(worst, _rel_err(c.div_x_f_u(t, x, u), divfu))
    if worst > _REL_TOL:
        raise HypothesisViolation(
            f"analytic partials of {problem.label or 'problem'} disagree with "
            f"finite differences (worst relative error {worst:.2e})"
        )
    return worst


def check_ellipticity(
    problem: ParabolicProblem,
    T: float = 1.0,
    samples: int = 2048,
    region: Optional[Region] = None,
) -> tuple[float, float]:
    """Sample the diffusion coefficient over the hypothesis box and check it
    stays within the declared [a_star, a_sup]; returns (min, max) sampled."""
    from .grid import full_region

    if region is None:
        region = full_region(Grid(problem.coeffs.dim, 1.0, 16))
    box = SampleBox((0.0, T), region, (-problem.u_box, problem.u_box),
                    (-problem.q_box, problem.q_box))
    t, x, u, q = _box_samples(box, samples)
    vals = np.broadcast_to(np.asarray(problem.coeffs.a(t, x, u, q), float), u.shape)
    lo, hi = float(np.min(vals)), float(np.max(vals))
    if lo < problem.bounds.a_star * (1 - 1e-12) or hi > problem.bounds.a_sup * (1 + 1e-12):
        raise HypothesisViolation(
            f"diffusion of {problem.label or 'problem'} sampled outside "
            f"[{problem.bounds.a_star}, {problem.bounds.a_sup}]: [{lo}, {hi}]"
        )
    return lo, hi
