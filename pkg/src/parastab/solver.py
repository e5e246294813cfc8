"""Explicit time integration on periodic grids.

The method of lines reduces u_t = a Lap(u) + div_x f + f_u . grad(u) + h to
an ODE system closed by the second-order stencils; time stepping is the
classical four-stage Runge-Kutta scheme with a diffusion-limited step
dt <= cfl * dx^2 / (2 dim a_sup). The same integrator drives linear
equations z_t = alpha Lap(z) + beta . grad(z) + gamma z + sigma whose
coefficient fields are linearly interpolated in t between stored slices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowUp, NonFinite, RangeError
from .grid import Grid, ScalarField, gradient_values, laplacian_values
from .problems import ParabolicProblem

_GUARD_EVERY = 25


@dataclass(frozen=True)
class StepControl:
    """Time-step policy: CFL fraction, hard cap, and snapshot stride."""

    cfl_fraction: float = 0.25
    dt_max: float = math.inf
    store_every: int = 1

    def __post_init__(self):
        if not (0 < self.cfl_fraction <= 1):
            raise RangeError(f"cfl_fraction must be in (0, 1], got {self.cfl_fraction}")
        if self.dt_max <= 0 or self.store_every < 1:
            raise RangeError("dt_max must be positive and store_every >= 1")

    def dt(self, grid: Grid, a_sup: float) -> float:
        dx = grid.dx
        return min(self.cfl_fraction * dx * dx / (2.0 * grid.dim * a_sup), self.dt_max)


@dataclass(frozen=True)
class Trajectory:
    """Snapshots of one solution: times[0] = 0, last time = T."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray  # (n_snapshots, *grid.shape)
    dt: float

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("snapshot count differs from time count")
        if not np.all(np.isfinite(self.values)):
            raise NonFinite("trajectory contains NaN or Inf")

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def field(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.values[i])

    def at(self, t: float) -> np.ndarray:
        """Snapshot linearly interpolated in time."""
        times = self.times
        if not (times[0] - 1e-12 <= t <= times[-1] + 1e-12):
            raise RangeError(f"t={t} outside stored range [{times[0]}, {times[-1]}]")
        j = int(np.searchsorted(times, t, side="right"))
        j = min(max(j, 1), len(times) - 1)
        t0, t1 = times[j - 1], times[j]
        w = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        return (1.0 - w) * self.values[j - 1] + w * self.values[j]

    def at_field(self, t: float) -> ScalarField:
        return ScalarField(self.grid, self.at(t))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


class TimeField:
    """A scalar field known at stored times, linearly interpolated between."""

    def __init__(self, times: np.ndarray, values: np.ndarray):
        self.times = np.asarray(times, float)
        self.values = np.asarray(values, float)
        if len(self.times) != len(self.values):
            raise ValueError("slice count differs from time count")

    @classmethod
    def constant(cls, value, T: float) -> "TimeField":
        arr = np.asarray(value, float)
        return cls(np.array([0.0, T]), np.stack([arr, arr]))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def at(self, t: float) -> np.ndarray:
        times = self.times
        if t <= times[0]:
            return self.values[0]
        if t >= times[-1]:
            return self.values[-1]
        j = int(np.searchsorted(times, t, side="right"))
        t0, t1 = times[j - 1], times[j]
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * self.values[j - 1] + w * self.values[j]


class TimeVectorField:
    """One TimeField per spatial axis."""

    def __init__(self, components: tuple[TimeField, ...]):
        self.components = tuple(components)

    @classmethod
    def constant(cls, values, T: float) -> "TimeVectorField":
        return cls(tuple(TimeField.constant(v, T) for v in values))

    def at(self, t: float) -> tuple[np.ndarray, ...]:
        return tuple(c.at(t) for c in self.components)


def rhs(problem: ParabolicProblem, u: ScalarField, t: float) -> ScalarField:
    """The semi-discrete right-hand side at one state."""
    grid = u.grid
    vals = rhs_values(problem, grid, grid.coords(), u.values, t)
    return ScalarField(grid, np.broadcast_to(vals, grid.shape).copy())


def rhs_values(problem: ParabolicProblem, grid: Grid, coords, u: np.ndarray, t: float) -> np.ndarray:
    c = problem.coeffs
    dx = grid.dx
    grad = gradient_values(u, dx)
    lap = laplacian_values(u, dx)
    out = c.a(t, coords, u, grad) * lap
    if not c.zero_flux:
        out = out + c.div_x_f(t, coords, u)
        for fu_j, g_j in zip(c.f_u(t, coords, u), grad):
            out = out + fu_j * g_j
    if not c.zero_source:
        out = out + c.h(t, coords, u, grad)
    return out


def _integrate(f, u0: np.ndarray, dt: float, n_steps: int, store_every: int,
               guard: float, grid: Grid) -> Trajectory:
    """RK4 march of du/dt = f(t, u) storing every store_every-th step and
    the final one."""
    u = np.array(u0, float)
    times = [0.0]
    snaps = [u.copy()]
    for i in range(n_steps):
        t = i * dt
        k1 = f(t, u)
        k2 = f(t + 0.5 * dt, u + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, u + 0.5 * dt * k2)
        k4 = f(t + dt, u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        done = i + 1 == n_steps
        if done or (i + 1) % _GUARD_EVERY == 0:
            if not np.all(np.isfinite(u)):
                raise NonFinite(f"solution lost finiteness near t={t + dt}")
            if np.max(np.abs(u)) > guard:
                raise BlowUp(
                    f"sup-norm {np.max(np.abs(u)):.3e} exceeded the guard "
                    f"{guard:.3e} near t={t + dt}"
                )
        if done or (i + 1) % store_every == 0:
            times.append((i + 1) * dt)
            snaps.append(u.copy())
    return Trajectory(grid, np.array(times), np.stack(snaps), dt)


def solve(problem: ParabolicProblem, grid: Grid, T: float,
          control: StepControl = StepControl(), dt: float | None = None) -> Trajectory:
    """Integrate the quasilinear problem on [0, T].

    A dt override (used to keep paired solves on identical step sequences)
    must not exceed the CFL step for this problem.
    """
    if T <= 0:
        raise RangeError(f"T must be positive, got {T}")
    cfl_dt = control.dt(grid, problem.bounds.a_sup)
    if dt is None:
        dt = cfl_dt
    elif dt > cfl_dt * (1 + 1e-12):
        raise RangeError(f"dt override {dt} exceeds the CFL step {cfl_dt}")
    n_steps = max(1, math.ceil(T / dt - 1e-12))
    dt = T / n_steps
    u0 = problem.initial_values(grid)
    guard = 1e3 * (float(np.max(np.abs(u0))) + 1.0)
    coords = grid.coords()

    def f(t, u):
        return np.broadcast_to(rhs_values(problem, grid, coords, u, t), grid.shape)

    return _integrate(f, u0, dt, n_steps, control.store_every, guard, grid)


def solve_linear(alpha: TimeField, beta: TimeVectorField, gamma: TimeField,
                 sigma: TimeField, z0: ScalarField, T: float,
                 control: StepControl = StepControl(),
                 dt: float | None = None) -> Trajectory:
    """Integrate z_t = alpha Lap(z) + beta . grad(z) + gamma z + sigma."""
    if T <= 0:
        raise RangeError(f"T must be positive, got {T}")
    grid = z0.grid
    if dt is None:
        dt = control.dt(grid, max(alpha.sup(), 1e-300))
    n_steps = max(1, math.ceil(T / dt - 1e-12))
    dt = T / n_steps
    guard = 1e3 * (z0.sup_norm() + 1.0)
    dx = grid.dx

    def f(t, z):
        out = alpha.at(t) * laplacian_values(z, dx)
        for b_j, g_j in zip(beta.at(t), gradient_values(z, dx)):
            out += b_j * g_j
        out += gamma.at(t) * z
        out += sigma.at(t)
        return out

    return _integrate(f, z0.values, dt, n_steps, control.store_every, guard, grid)
