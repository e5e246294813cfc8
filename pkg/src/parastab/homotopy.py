"""The interpolating family between two parabolic problems.

For a pair (P, Q) and theta in [0, 1], the blended problem has coefficients
theta * P + (1 - theta) * Q and initial data blended the same way, so
theta = 1 recovers P and theta = 0 recovers Q. Differentiating the blended
solution in theta yields a linear parabolic equation

    z_t = alpha Lap(z) + beta . grad(z) + gamma z + sigma,   z(0) = phi - psi,

whose coefficients are assembled here from the blended trajectory. The
L^p distance between the endpoint solutions is bounded by the curve length
integral of ||z_theta(t)||_{L^p(E)} over theta, evaluated by Gauss-Legendre
quadrature.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, HypothesisViolation, RangeError
from .grid import (Grid, Region, ScalarField, VectorField, gradient_values,
                   laplacian_values, lp_norm)
from .problems import CoefficientSet, FieldBounds, ParabolicProblem
from .solver import (StepControl, TimeField, TimeVectorField, Trajectory,
                     solve, solve_linear)


@dataclass(frozen=True)
class LinearizedCoefficients:
    """The coefficient fields of the sensitivity equation at one (theta, t)."""

    alpha: ScalarField
    beta: VectorField
    gamma: ScalarField
    sigma: ScalarField
    alpha_floor: float

    def __post_init__(self):
        if float(np.min(self.alpha.values)) < self.alpha_floor * (1 - 1e-12):
            raise HypothesisViolation(
                "assembled alpha dropped below the blended ellipticity floor"
            )


@dataclass(frozen=True)
class HomotopyRun:
    """The blended solution and its sensitivity field at one theta."""

    theta: float
    u_trajectory: Trajectory
    z_trajectory: Trajectory

    def __post_init__(self):
        if self.u_trajectory.grid != self.z_trajectory.grid:
            raise DimMismatch("paired trajectories live on different grids")
        if not np.array_equal(self.u_trajectory.times, self.z_trajectory.times):
            raise ValueError("paired trajectories disagree on snapshot times")


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights on [0, 1] with unit total weight."""

    nodes: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if abs(sum(self.weights) - 1.0) > 1e-14:
            raise ValueError("quadrature weights must sum to 1")
        if any(w <= 0 for w in self.weights):
            raise ValueError("quadrature weights must be positive")
        if list(self.nodes) != sorted(self.nodes):
            raise ValueError("quadrature nodes must be sorted")

    @classmethod
    def gauss_legendre(cls, n: int = 8) -> "QuadratureRule":
        x, w = np.polynomial.legendre.leggauss(n)
        return cls(tuple((x + 1.0) / 2.0), tuple(w / 2.0))


def _blend_pair(p_fn, q_fn, theta):
    t1 = 1.0 - theta

    def fn(*args):
        return theta * p_fn(*args) + t1 * q_fn(*args)

    return fn


def _blend_vector(p_fn, q_fn, theta, dim):
    t1 = 1.0 - theta

    def fn(*args):
        fp = p_fn(*args)
        fq = q_fn(*args)
        return tuple(theta * fp[j] + t1 * fq[j] for j in range(dim))

    return fn


def blend(P: ParabolicProblem, Q: ParabolicProblem, theta: float) -> ParabolicProblem:
    """The convex combination theta * P + (1 - theta) * Q of coefficients,
    partials, initial data, and hypothesis metadata."""
    if not (0.0 <= theta <= 1.0):
        raise RangeError(f"theta must lie in [0, 1], got {theta}")
    cp, cq = P.coeffs, Q.coeffs
    if cp.dim != cq.dim:
        raise DimMismatch("cannot blend problems of different dimension")
    dim = cp.dim
    coeffs = CoefficientSet(
        dim=dim,
        a=_blend_pair(cp.a, cq.a, theta),
        a_u=_blend_pair(cp.a_u, cq.a_u, theta),
        a_q=_blend_vector(cp.a_q, cq.a_q, theta, dim),
        f=_blend_vector(cp.f, cq.f, theta, dim),
        f_u=_blend_vector(cp.f_u, cq.f_u, theta, dim),
        f_uu=_blend_vector(cp.f_uu, cq.f_uu, theta, dim),
        div_x_f=_blend_pair(cp.div_x_f, cq.div_x_f, theta),
        div_x_f_u=_blend_pair(cp.div_x_f_u, cq.div_x_f_u, theta),
        h=_blend_pair(cp.h, cq.h, theta),
        h_u=_blend_pair(cp.h_u, cq.h_u, theta),
        h_q=_blend_vector(cp.h_q, cq.h_q, theta, dim),
        zero_flux=cp.zero_flux and cq.zero_flux,
        zero_source=cp.zero_source and cq.zero_source,
    )
    bp, bq = P.bounds, Q.bounds
    t1 = 1.0 - theta
    bounds = FieldBounds(
        a_star=theta * bp.a_star + t1 * bq.a_star,
        a_sup=theta * bp.a_sup + t1 * bq.a_sup,
        k1=theta * bp.k1 + t1 * bq.k1,
        k2=theta * bp.k2 + t1 * bq.k2,
        k3=theta * bp.k3 + t1 * bq.k3,
    )
    initial = _blend_pair(P.initial, Q.initial, theta)
    return ParabolicProblem(
        coeffs, initial, bounds,
        u_box=max(P.u_box, Q.u_box), q_box=max(P.q_box, Q.q_box),
        label=f"blend({P.label}, {Q.label}, theta={theta})",
    )


def assemble_linearized(
    P: ParabolicProblem, Q: ParabolicProblem, theta: float,
    u_theta: ScalarField, t: float,
) -> LinearizedCoefficients:
    """Evaluate the sensitivity-equation coefficients at one blended state."""
    arrays = _assemble_arrays(P.coeffs, Q.coeffs, theta, u_theta.grid,
                              u_theta.grid.coords(), u_theta.values, t)
    grid = u_theta.grid
    alpha, beta, gamma, sigma = arrays

    def full(a):
        return np.array(np.broadcast_to(a, grid.shape), float)

    return LinearizedCoefficients(
        alpha=ScalarField(grid, full(alpha)),
        beta=VectorField(grid, tuple(full(b) for b in beta)),
        gamma=ScalarField(grid, full(gamma)),
        sigma=ScalarField(grid, full(sigma)),
        alpha_floor=min(P.bounds.a_star, Q.bounds.a_star),
    )


def _assemble_arrays(cp: CoefficientSet, cq: CoefficientSet, theta: float,
                     grid: Grid, coords, u: np.ndarray, t: float):
    """alpha, beta, gamma, sigma as raw (broadcastable) arrays."""
    t1 = 1.0 - theta
    dx = grid.dx
    lap_u = laplacian_values(u, dx)
    grad_u = gradient_values(u, dx)
    q = grad_u
    dim = cp.dim

    a_p = cp.a(t, coords, u, q)
    a_q_ = cq.a(t, coords, u, q)
    alpha = theta * a_p + t1 * a_q_

    aq_p, aq_q = cp.a_q(t, coords, u, q), cq.a_q(t, coords, u, q)
    fu_p, fu_q = cp.f_u(t, coords, u), cq.f_u(t, coords, u)
    hq_p, hq_q = cp.h_q(t, coords, u, q), cq.h_q(t, coords, u, q)
    beta = tuple(
        (theta * aq_p[j] + t1 * aq_q[j]) * lap_u
        + (theta * fu_p[j] + t1 * fu_q[j])
        + (theta * hq_p[j] + t1 * hq_q[j])
        for j in range(dim)
    )

    fuu_p, fuu_q = cp.f_uu(t, coords, u), cq.f_uu(t, coords, u)
    gamma = (
        (theta * cp.a_u(t, coords, u, q) + t1 * cq.a_u(t, coords, u, q)) * lap_u
        + theta * cp.div_x_f_u(t, coords, u) + t1 * cq.div_x_f_u(t, coords, u)
        + theta * cp.h_u(t, coords, u, q) + t1 * cq.h_u(t, coords, u, q)
        + sum((theta * fuu_p[j] + t1 * fuu_q[j]) * grad_u[j] for j in range(dim))
    )

    sigma = (
        (a_p - a_q_) * lap_u
        + sum((fu_p[j] - fu_q[j]) * grad_u[j] for j in range(dim))
        + cp.div_x_f(t, coords, u) - cq.div_x_f(t, coords, u)
        + cp.h(t, coords, u, q) - cq.h(t, coords, u, q)
    )
    return alpha, beta, gamma, sigma


def sensitivity_initial(P: ParabolicProblem, Q: ParabolicProblem, grid: Grid) -> ScalarField:
    """The sensitivity initial state: difference of the pair's initial data."""
    return ScalarField(grid, P.initial_values(grid) - Q.initial_values(grid))


def solve_sensitivity(
    P: ParabolicProblem, Q: ParabolicProblem, theta: float, grid: Grid,
    T: float, control: StepControl = StepControl(),
) -> HomotopyRun:
    """Solve the blended problem, assemble the linearized coefficients along
    its stored snapshots, and integrate the sensitivity equation with the
    same step sequence."""
    blended = blend(P, Q, theta)
    u_traj = solve(blended, grid, T, control)
    coords = grid.coords()
    shape = grid.shape
    n = len(u_traj.times)
    alpha = np.empty((n, *shape))
    beta = [np.empty((n, *shape)) for _ in range(grid.dim)]
    gamma = np.empty((n, *shape))
    sigma = np.empty((n, *shape))
    for i, (ti, ui) in enumerate(zip(u_traj.times, u_traj.values)):
        al, be, ga, si = _assemble_arrays(P.coeffs, Q.coeffs, theta, grid,
                                          coords, ui, float(ti))
        alpha[i] = al
        for j in range(grid.dim):
            beta[j][i] = np.broadcast_to(be[j], shape)
        gamma[i] = np.broadcast_to(ga, shape)
        sigma[i] = np.broadcast_to(si, shape)
    floor = min(P.bounds.a_star, Q.bounds.a_star)
    if float(np.min(alpha)) < floor * (1 - 1e-12):
        raise HypothesisViolation("assembled alpha dropped below the ellipticity floor")
    z0 = sensitivity_initial(P, Q, grid)
    z_traj = solve_linear(
        TimeField(u_traj.times, alpha),
        TimeVectorField(tuple(TimeField(u_traj.times, b) for b in beta)),
        TimeField(u_traj.times, gamma),
        TimeField(u_traj.times, sigma),
        z0, T, control, dt=u_traj.dt,
    )
    return HomotopyRun(theta, u_traj, z_traj)


def fd_sensitivity(
    P: ParabolicProblem, Q: ParabolicProblem, theta: float, delta: float,
    grid: Grid, control: StepControl, t: float,
) -> ScalarField:
    """Centered finite-difference sensitivity (u_{theta+delta} -
    u_{theta-delta}) / (2 delta) at time t, from two blended solves on a
    common step sequence."""
    if not (0.0 <= theta - delta and theta + delta <= 1.0):
        raise RangeError(f"theta +/- delta must stay in [0, 1], got {theta} +/- {delta}")
    up = blend(P, Q, theta + delta)
    dn = blend(P, Q, theta - delta)
    dt = min(control.dt(grid, up.bounds.a_sup), control.dt(grid, dn.bounds.a_sup))
    traj_up = solve(up, grid, t, control, dt=dt)
    traj_dn = solve(dn, grid, t, control, dt=dt)
    return ScalarField(grid, (traj_up.at(t) - traj_dn.at(t)) / (2.0 * delta))


def sensitivity_runs(
    P: ParabolicProblem, Q: ParabolicProblem, grid: Grid, T: float,
    control: StepControl, rule: QuadratureRule, threads: int = 1,
) -> list[HomotopyRun]:
    """One HomotopyRun per quadrature node, in node order."""
    def at_node(theta):
        return solve_sensitivity(P, Q, theta, grid, T, control)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(at_node, rule.nodes))
    return [at_node(theta) for theta in rule.nodes]


def curve_length_from_runs(
    runs: list[HomotopyRun], rule: QuadratureRule, E: Region, p: float, t: float,
) -> float:
    """Weighted quadrature of ||z_theta(t)||_{L^p(E)} over the nodes, reduced
    in node order."""
    total = 0.0
    for w, run in zip(rule.weights, runs):
        total += w * lp_norm(run.z_trajectory.at_field(t), E, p)
    return total


def curve_length(
    P: ParabolicProblem, Q: ParabolicProblem, E: Region, p: float, t: float,
    rule: QuadratureRule = QuadratureRule.gauss_legendre(8),
    control: StepControl = StepControl(), threads: int = 1,
) -> float:
    """The L^p(E) length of the theta curve at time t."""
    runs = sensitivity_runs(P, Q, E.grid, t, control, rule, threads)
    return curve_length_from_runs(runs, rule, E, p, t)


def fitted_growth_constant(runs: list[HomotopyRun], z0_sup: float) -> float:
    """Smallest nonnegative slope c with sup|z_theta(t)| <= c t + sup|z(0)|
    over every node and stored positive time."""
    c = 0.0
    for run in runs:
        times = run.z_trajectory.times
        for i in range(len(times)):
            t = float(times[i])
            if t <= 0.0:
                continue
            sup = float(np.max(np.abs(run.z_trajectory.values[i])))
            c = max(c, (sup - z0_sup) / t)
    return c
